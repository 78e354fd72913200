//! Goal texts mark every task parameter with double quotes. This module
//! splits a goal into its parameter-free signature and the slot values.

/// Goal with each quoted span replaced by `"$k"`, plus the span contents in
/// order of appearance. An unbalanced trailing quote is kept literally.
pub fn split_goal(goal: &str) -> (String, Vec<String>) {
    let mut signature = String::with_capacity(goal.len());
    let mut slots = Vec::new();
    let mut rest = goal;
    while let Some(open) = rest.find('"') {
        let after = &rest[open + 1..];
        let Some(close) = after.find('"') else { break };
        signature.push_str(&rest[..open]);
        signature.push_str(&format!("\"${}\"", slots.len()));
        slots.push(after[..close].to_string());
        rest = &after[close + 1..];
    }
    signature.push_str(rest);
    (signature, slots)
}

pub fn goal_signature(goal: &str) -> String {
    split_goal(goal).0
}

/// Index of the slot whose value equals `text`, if any. Empty text never
/// matches.
pub fn slot_of(slots: &[String], text: &str) -> Option<usize> {
    if text.is_empty() {
        return None;
    }
    slots.iter().position(|s| s == text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_quoted_slots() {
        let (sig, slots) =
            split_goal("Create a new contact for \"Sofija Alves\" with phone number \"+1 415\".");
        assert_eq!(sig, "Create a new contact for \"$0\" with phone number \"$1\".");
        assert_eq!(slots, vec!["Sofija Alves", "+1 415"]);
    }

    #[test]
    fn no_slots_and_unbalanced() {
        assert_eq!(split_goal("Record an audio clip."), ("Record an audio clip.".into(), vec![]));
        let (sig, slots) = split_goal("say \"a\" and \"b");
        assert_eq!(sig, "say \"$0\" and \"b");
        assert_eq!(slots, vec!["a"]);
    }

    #[test]
    fn slot_lookup() {
        let slots = vec!["on".to_string(), "x".to_string()];
        assert_eq!(slot_of(&slots, "x"), Some(1));
        assert_eq!(slot_of(&slots, "y"), None);
        assert_eq!(slot_of(&slots, ""), None);
    }
}
