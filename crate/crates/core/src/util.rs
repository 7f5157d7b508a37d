use std::path::{Component, Path, PathBuf};

pub const TRUNCATION_MARKER: &str = " …[truncated]";

/// Joins a user-supplied relative path onto `root`, refusing anything that
/// could leave it (absolute paths, `..`, drive prefixes).
pub fn safe_join(root: &Path, rel: &str) -> Result<PathBuf, String> {
    let rel = rel.trim();
    let mut out = root.to_path_buf();
    for comp in Path::new(rel).components() {
        match comp {
            Component::Normal(part) => out.push(part),
            Component::CurDir => {}
            Component::ParentDir => return Err(format!("path {rel:?} escapes the working directory")),
            Component::RootDir | Component::Prefix(_) => {
                return Err(format!("path {rel:?} must be relative to the working directory"))
            }
        }
    }
    Ok(out)
}

/// Caps `text` at `cap` characters, marker included.
pub fn truncate_chars(text: &str, cap: usize) -> String {
    if text.chars().count() <= cap {
        return text.to_string();
    }
    let keep = cap.saturating_sub(TRUNCATION_MARKER.chars().count());
    let mut out: String = text.chars().take(keep).collect();
    out.push_str(TRUNCATION_MARKER);
    out.chars().take(cap).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn joins_inside_root_only() {
        let root = Path::new("/w");
        assert_eq!(safe_join(root, "a/./b.xyz").unwrap(), Path::new("/w/a/b.xyz"));
        assert_eq!(safe_join(root, "").unwrap(), Path::new("/w"));
        assert!(safe_join(root, "../etc/passwd").is_err());
        assert!(safe_join(root, "a/../../x").is_err());
        assert!(safe_join(root, "/etc/passwd").is_err());
    }

    #[test]
    fn truncation() {
        assert_eq!(truncate_chars("short", 10), "short");
        let t = truncate_chars(&"x".repeat(50), 20);
        assert_eq!(t.chars().count(), 20);
        assert!(t.ends_with(TRUNCATION_MARKER));
    }

    proptest! {
        #[test]
        fn truncation_respects_cap(s in ".{0,300}", cap in 0usize..200) {
            let t = truncate_chars(&s, cap);
            prop_assert!(t.chars().count() <= cap.max(s.chars().count().min(cap)));
            if s.chars().count() <= cap {
                prop_assert_eq!(t, s);
            }
        }
    }
}
