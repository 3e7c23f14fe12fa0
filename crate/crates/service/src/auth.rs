//! Bearer session tokens.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use platetrack_core::trackstore::{random_token, Role};

/// Milliseconds since the Unix epoch; injectable for tests.
pub type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(platetrack_core::pipeline::now_ms)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    pub username: String,
    pub role: Role,
    pub expires_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionToken {
    pub token: String,
    pub role: Role,
    pub expires_at: i64,
}

pub struct TokenTable {
    ttl_ms: i64,
    sessions: RwLock<HashMap<String, Session>>,
}

impl TokenTable {
    pub fn new(ttl_ms: i64) -> Self {
        Self { ttl_ms, sessions: RwLock::new(HashMap::new()) }
    }

    pub fn issue(&self, username: &str, role: Role, now: i64) -> SessionToken {
        // 16 random bytes, URL-safe base64
        let token = random_token(16);
        let expires_at = now.saturating_add(self.ttl_ms);
        let mut sessions = self.sessions.write().expect("token table lock");
        sessions.retain(|_, s| s.expires_at > now);
        sessions.insert(token.clone(), Session { username: username.to_string(), role, expires_at });
        SessionToken { token, role, expires_at }
    }

    /// The live session for `token`; expired sessions authenticate nothing.
    pub fn lookup(&self, token: &str, now: i64) -> Option<Session> {
        let sessions = self.sessions.read().expect("token table lock");
        sessions.get(token).filter(|s| s.expires_at > now).cloned()
    }

    pub fn revoke(&self, token: &str) -> bool {
        self.sessions.write().expect("token table lock").remove(token).is_some()
    }

    pub fn revoke_user(&self, username: &str) {
        self.sessions.write().expect("token table lock").retain(|_, s| s.username != username);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expiry_and_revocation() {
        let table = TokenTable::new(1000);
        let t = table.issue("ana", Role::Basic, 0);
        assert_eq!(t.expires_at, 1000);
        assert_eq!(table.lookup(&t.token, 999).unwrap().username, "ana");
        assert!(table.lookup(&t.token, 1000).is_none());
        let u = table.issue("ana", Role::Basic, 5000);
        assert!(table.revoke(&u.token));
        assert!(table.lookup(&u.token, 5001).is_none());
        assert!(table.lookup("made-up", 0).is_none());
    }

    #[test]
    fn tokens_are_distinct_and_128_bit() {
        let table = TokenTable::new(1000);
        let a = table.issue("a", Role::Admin, 0).token;
        let b = table.issue("a", Role::Admin, 0).token;
        assert_ne!(a, b);
        // 16 bytes → 22 unpadded base64 characters
        assert_eq!(a.len(), 22);
        assert!(a.bytes().all(|c| c.is_ascii_alphanumeric() || c == b'-' || c == b'_'));
    }

    #[test]
    fn revoke_user_drops_all_sessions() {
        let table = TokenTable::new(1000);
        let a = table.issue("a", Role::Admin, 0).token;
        let b = table.issue("b", Role::Basic, 0).token;
        table.revoke_user("a");
        assert!(table.lookup(&a, 1).is_none());
        assert!(table.lookup(&b, 1).is_some());
    }
}
