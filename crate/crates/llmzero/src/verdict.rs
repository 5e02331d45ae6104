use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictValue {
    Human,
    Synthetic,
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub value: VerdictValue,
    /// Always the complete response text.
    pub raw_response: String,
    pub model_id: String,
    /// Provider-reported model version, when the response carried one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_version: Option<String>,
    /// RFC 3339 time the response was received.
    pub timestamp: String,
}

/// Looks for the standalone words "human" and "computer" (case-insensitive,
/// punctuation ignored). Exactly one of them decides the verdict; both or
/// neither is unparseable.
pub fn parse_verdict(response: &str) -> VerdictValue {
    let lowered = response.to_lowercase();
    let words: Vec<&str> = lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    let human = words.contains(&"human");
    let computer = words.contains(&"computer");
    match (human, computer) {
        (true, false) => VerdictValue::Human,
        (false, true) => VerdictValue::Synthetic,
        _ => VerdictValue::Unparseable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_cases() {
        assert_eq!(parse_verdict("Human"), VerdictValue::Human);
        assert_eq!(parse_verdict("It was written by a computer."), VerdictValue::Synthetic);
        assert_eq!(parse_verdict("It could be a human or a computer."), VerdictValue::Unparseable);
        assert_eq!(parse_verdict(""), VerdictValue::Unparseable);
        assert_eq!(parse_verdict("I cannot tell."), VerdictValue::Unparseable);
        assert_eq!(parse_verdict("COMPUTER!!!"), VerdictValue::Synthetic);
        assert_eq!(parse_verdict("\"Human.\""), VerdictValue::Human);
        // words merely containing the tokens do not count
        assert_eq!(parse_verdict("humane computers"), VerdictValue::Unparseable);
    }
}
