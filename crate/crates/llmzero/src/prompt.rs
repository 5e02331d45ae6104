use serde::{Deserialize, Serialize};

use crate::ZeroShotError;

/// Fixed instruction placed before every article.
pub const PREAMBLE: &str = "Was the following written by a human or a computer, choose human or computer only?";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionPrompt {
    pub preamble: String,
    pub article: String,
}

impl DetectionPrompt {
    /// Preamble, one `\n`, then the article bytes unchanged.
    pub fn text(&self) -> String {
        format!("{}\n{}", self.preamble, self.article)
    }
}

pub fn build_prompt(article: &str) -> Result<DetectionPrompt, ZeroShotError> {
    if article.trim().is_empty() {
        return Err(ZeroShotError::EmptyArticle);
    }
    Ok(DetectionPrompt {
        preamble: PREAMBLE.to_string(),
        article: article.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_layout() {
        let p = build_prompt("abc").unwrap().text();
        assert!(p.ends_with("\nabc"));
        assert!(p.starts_with(PREAMBLE));
        assert_eq!(p.len(), PREAMBLE.len() + 4);
        assert_eq!(build_prompt("abc").unwrap().text().as_bytes(), p.as_bytes());
        assert!(matches!(build_prompt(" \n"), Err(ZeroShotError::EmptyArticle)));
    }
}
