//! Chat prompt assembly, conversation history and trial-id hyperlinking.

mod linkify;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::context::{ContextBlock, NO_REFERENCES_MARKER};

pub use linkify::{linkify_trial_ids, trial_link, StreamLinkifier, TRIAL_URL_PREFIX};

pub const RAG_TEMPLATE: &str = include_str!("../../templates/rag_prompt.txt");
pub const CONTEXT_SLOT: &str = "{context}";

/// Most recent turns replayed into a prompt.
pub const HISTORY_MAX_TURNS: usize = 8;
/// Character budget for replayed history.
pub const HISTORY_MAX_CHARS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage { role, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HistoryError {
    #[error("an assistant turn must answer a pending user turn")]
    NoPendingQuestion,
    #[error("history only holds user and assistant turns")]
    BadRole,
}

/// One conversation. History only grows; every assistant turn directly
/// follows the user turn it answers. A user turn whose answer failed stays
/// unanswered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatSession {
    pub session_id: String,
    pub created_at: u64,
    history: Vec<Turn>,
}

impl ChatSession {
    pub fn new(session_id: impl Into<String>, created_at: u64) -> Self {
        ChatSession { session_id: session_id.into(), created_at, history: Vec::new() }
    }

    pub fn history(&self) -> &[Turn] {
        &self.history
    }

    pub fn push_user(&mut self, text: impl Into<String>, timestamp: u64) {
        self.history.push(Turn { role: Role::User, text: text.into(), timestamp });
    }

    pub fn push_assistant(&mut self, text: impl Into<String>, timestamp: u64) -> Result<(), HistoryError> {
        match self.history.last() {
            Some(t) if t.role == Role::User => {
                self.history.push(Turn { role: Role::Assistant, text: text.into(), timestamp });
                Ok(())
            }
            _ => Err(HistoryError::NoPendingQuestion),
        }
    }

    /// Rebuilds a session from stored turns, checking the history shape.
    pub fn from_parts(session_id: String, created_at: u64, turns: Vec<Turn>) -> Result<Self, HistoryError> {
        let mut s = ChatSession::new(session_id, created_at);
        for t in turns {
            match t.role {
                Role::User => s.push_user(t.text, t.timestamp),
                Role::Assistant => s.push_assistant(t.text, t.timestamp)?,
                Role::System => return Err(HistoryError::BadRole),
            }
        }
        Ok(s)
    }

    /// Turns replayed into the next prompt: at most [`HISTORY_MAX_TURNS`]
    /// recent turns within [`HISTORY_MAX_CHARS`], evicting the oldest
    /// exchange first. The window never starts with an assistant turn.
    pub fn prompt_window(&self) -> &[Turn] {
        let h = &self.history;
        let mut start = h.len().saturating_sub(HISTORY_MAX_TURNS);
        let chars = |s: usize| h[s..].iter().map(|t| t.text.chars().count()).sum::<usize>();
        loop {
            if start < h.len() && h[start].role == Role::Assistant {
                start += 1;
                continue;
            }
            if start >= h.len() || chars(start) <= HISTORY_MAX_CHARS {
                break;
            }
            // Drop the oldest user turn and the answer to it, if any.
            start += 1;
            if start < h.len() && h[start].role == Role::Assistant {
                start += 1;
            }
        }
        &h[start..]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RagPrompt {
    pub system: String,
    /// Replayed history, then the question.
    pub messages: Vec<ChatMessage>,
}

impl RagPrompt {
    /// System message first, ready for a chat-completion request.
    pub fn to_messages(&self) -> Vec<ChatMessage> {
        let mut out = Vec::with_capacity(self.messages.len() + 1);
        out.push(ChatMessage::new(Role::System, self.system.clone()));
        out.extend(self.messages.iter().cloned());
        out
    }
}

/// The system prompt with `context` in place of the slot.
pub fn render_system_prompt(context: &ContextBlock) -> String {
    let mut body = String::from(context.rendered.trim_end_matches('\n'));
    if context.evidence.is_empty() && !body.contains(NO_REFERENCES_MARKER) {
        if !body.is_empty() {
            body.push('\n');
        }
        body.push_str(NO_REFERENCES_MARKER);
    }
    RAG_TEMPLATE.replacen(CONTEXT_SLOT, &body, 1)
}

pub fn build_rag_prompt(context: &ContextBlock, session: &ChatSession, question: &str) -> RagPrompt {
    let mut messages: Vec<ChatMessage> = session
        .prompt_window()
        .iter()
        .map(|t| ChatMessage::new(t.role, t.text.clone()))
        .collect();
    messages.push(ChatMessage::new(Role::User, question));
    RagPrompt { system: render_system_prompt(context), messages }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{render_context, EvidenceRow, RetrievalConfig};
    use alloc::format;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    const GUIDELINES: [&str; 5] = [
        "1. **Incorporate and Format Available References:**  ",
        "2. **Indicate When Reference Data Is Missing:**  ",
        "3. **Express Uncertainty When Necessary:**  ",
        "4. **Maintain Accuracy and Integrity:**  ",
        "5. **Communicate Professionally and Clearly:**  ",
    ];

    fn row(p: &str) -> EvidenceRow {
        EvidenceRow {
            relation: format!("r/{p}"),
            predicate: "cause".into(),
            subject: "smoking".into(),
            object: "age-related macular degeneration".into(),
            publication_id: p.into(),
        }
    }

    #[test]
    fn template_is_verbatim() {
        assert!(RAG_TEMPLATE.starts_with(
            "You are a highly knowledgeable and trusted medical research assistant specializing in age-related macular degeneration (AMD). You have access to the following additional relevant data:\n{context}\n"
        ));
        assert!(RAG_TEMPLATE.ends_with("Please begin your response below.\n"));
        assert_eq!(RAG_TEMPLATE.matches(CONTEXT_SLOT).count(), 1);
        assert!(RAG_TEMPLATE.contains(
            "     [NCT01291121](https://app.dimensions.ai/details/clinical_trial/NCT01291121)\n"
        ));
    }

    #[test]
    fn prompt_with_evidence() {
        let rows = vec![row("NCT99000001"), row("NCT99000002")];
        let block = render_context(&[], &rows, &RetrievalConfig::default());
        let p = build_rag_prompt(&block, &ChatSession::new("s", 0), "what causes AMD?");
        assert!(!p.system.contains(CONTEXT_SLOT));
        for g in GUIDELINES {
            assert!(p.system.lines().any(|l| l == g), "{g}");
        }
        assert!(p.system.contains("NCT99000001") && p.system.contains("NCT99000002"));
        assert!(!p.system.contains(NO_REFERENCES_MARKER));
        assert!(p.system.contains("data:\nEvidence:\n- smoking"));
        assert_eq!(p.messages, vec![ChatMessage::new(Role::User, "what causes AMD?")]);
        let all = p.to_messages();
        assert_eq!(all[0].role, Role::System);
        assert_eq!(all.len(), 2);
    }

    #[test]
    fn prompt_without_evidence_has_marker() {
        let p = build_rag_prompt(&ContextBlock::empty(), &ChatSession::new("s", 0), "q");
        assert!(p.system.contains(NO_REFERENCES_MARKER));
        assert!(!p.system.contains(CONTEXT_SLOT));
        let bare = ContextBlock { matched_entities: vec![], evidence: vec![], rendered: String::new() };
        assert!(render_system_prompt(&bare).contains(NO_REFERENCES_MARKER));
    }

    #[test]
    fn history_is_replayed() {
        let mut s = ChatSession::new("s", 0);
        s.push_user("first question", 1);
        s.push_assistant("first answer", 2).unwrap();
        let p = build_rag_prompt(&ContextBlock::empty(), &s, "second");
        let roles: Vec<Role> = p.messages.iter().map(|m| m.role).collect();
        assert_eq!(roles, vec![Role::User, Role::Assistant, Role::User]);
        assert_eq!(p.messages[0].content, "first question");
        assert_eq!(p.messages[1].content, "first answer");
    }

    #[test]
    fn history_shape_enforced() {
        let mut s = ChatSession::new("s", 0);
        assert_eq!(s.push_assistant("x", 0), Err(HistoryError::NoPendingQuestion));
        s.push_user("q", 0);
        s.push_assistant("a", 0).unwrap();
        assert!(s.push_assistant("b", 0).is_err());
        let turns = s.history().to_vec();
        assert_eq!(ChatSession::from_parts("s".into(), 0, turns).unwrap(), s);
        let bad = vec![Turn { role: Role::System, text: String::new(), timestamp: 0 }];
        assert!(ChatSession::from_parts("s".into(), 0, bad).is_err());
    }

    #[test]
    fn window_caps_turns_and_chars() {
        let mut s = ChatSession::new("s", 0);
        for i in 0..10 {
            s.push_user(format!("q{i}"), 0);
            s.push_assistant(format!("a{i}"), 0).unwrap();
        }
        let w = s.prompt_window();
        assert_eq!(w.len(), 8);
        assert_eq!(w[0].text, "q6");
        let mut s = ChatSession::new("s", 0);
        s.push_user("x".repeat(1500), 0);
        s.push_assistant("y".repeat(400), 0).unwrap();
        s.push_user("z".repeat(300), 0);
        s.push_assistant("w".to_string(), 0).unwrap();
        let w = s.prompt_window();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].text, "z".repeat(300));
        let mut s = ChatSession::new("s", 0);
        s.push_user("x".repeat(2500), 0);
        assert!(s.prompt_window().is_empty());
    }

    proptest! {
        #[test]
        fn window_invariants(
            turns in proptest::collection::vec((any::<bool>(), 0usize..900), 0..30)
        ) {
            let mut s = ChatSession::new("s", 0);
            for (answered, len) in &turns {
                s.push_user("q".repeat(*len), 0);
                if *answered {
                    s.push_assistant("a".repeat(len / 2), 0).unwrap();
                }
            }
            let w = s.prompt_window();
            let h = s.history();
            prop_assert!(w.len() <= HISTORY_MAX_TURNS);
            prop_assert!(w.iter().map(|t| t.text.chars().count()).sum::<usize>() <= HISTORY_MAX_CHARS);
            prop_assert!(w.first().is_none_or(|t| t.role == Role::User));
            // A suffix of history.
            prop_assert_eq!(w, &h[h.len() - w.len()..]);
        }

        #[test]
        fn n_exchanges_give_2n_alternating_turns(n in 0usize..20) {
            let mut s = ChatSession::new("s", 0);
            for i in 0..n {
                s.push_user(format!("q{i}"), i as u64);
                s.push_assistant(format!("a{i}"), i as u64).unwrap();
            }
            prop_assert_eq!(s.history().len(), 2 * n);
            for (i, t) in s.history().iter().enumerate() {
                prop_assert_eq!(t.role, if i % 2 == 0 { Role::User } else { Role::Assistant });
            }
        }
    }
}
