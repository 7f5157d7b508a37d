use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use qflow_core::agent::{Session, SessionState};
use serde_json::{json, Value};
use tokio::sync::watch;

/// A live session and the channel its stepping thread announces new
/// events on.
pub struct SessionEntry {
    session: Mutex<Session>,
    wake: Condvar,
    seq: watch::Sender<u64>,
    pub created: String,
    pub task: String,
    pub expose_raw: bool,
}

impl SessionEntry {
    pub fn new(session: Session, created: String, task: String, expose_raw: bool) -> Self {
        let (seq, _) = watch::channel(session.trace().len() as u64);
        Self {
            session: Mutex::new(session),
            wake: Condvar::new(),
            seq,
            created,
            task,
            expose_raw,
        }
    }

    pub fn with<T>(&self, f: impl FnOnce(&mut Session) -> T) -> T {
        let mut s = self.session.lock().expect("session lock");
        f(&mut s)
    }

    pub fn wake(&self) {
        self.wake.notify_all();
        self.seq.send_modify(|_| {});
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.seq.subscribe()
    }

    pub fn summary(&self) -> Value {
        self.with(|s| {
            json!({
                "id": s.id(),
                "created": self.created,
                "task": self.task,
                "state": s.state(),
            })
        })
    }

    pub fn describe(&self) -> Value {
        self.with(|s| {
            let mut v = s.status();
            v["created"] = json!(self.created);
            v["task"] = json!(self.task);
            v["workdir"] = json!(s.workdir());
            v
        })
    }
}

/// The one writer per session: steps while running, sleeps while paused,
/// exits once terminal.
pub fn spawn(entry: Arc<SessionEntry>, delay: Duration) {
    std::thread::spawn(move || loop {
        let mut s = entry.session.lock().expect("session lock");
        match s.state() {
            SessionState::Running => {
                s.step_once();
                let n = s.trace().len() as u64;
                let settled = s.state() != SessionState::Running;
                drop(s);
                entry.seq.send_if_modified(|v| {
                    let changed = *v != n || settled;
                    *v = n;
                    changed
                });
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
            }
            SessionState::Paused => {
                let _unused = entry
                    .wake
                    .wait_while(s, |s| s.state() == SessionState::Paused)
                    .expect("session lock");
            }
            _ => {
                drop(s);
                entry.seq.send_modify(|_| {});
                break;
            }
        }
    });
}
