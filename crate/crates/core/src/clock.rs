use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

/// Source of timestamps. `Fixed` makes traces byte-identical across runs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    #[default]
    System,
    Fixed(String),
}

impl Clock {
    pub fn now(&self) -> String {
        match self {
            Clock::System => Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            Clock::Fixed(ts) => ts.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_and_system() {
        assert_eq!(Clock::Fixed("t0".into()).now(), "t0");
        let ts = Clock::System.now();
        assert!(chrono::DateTime::parse_from_rfc3339(&ts).is_ok());
    }
}
