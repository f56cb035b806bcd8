use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

static BASH_BLOCK: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?s)```bash\b(.*?)```").unwrap());

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub command: String,
    pub raw_block: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("no ```bash code block found; reply with exactly one bash code block containing one command")]
    NoActionFound,
    #[error("found {0} ```bash code blocks; reply with exactly one bash code block containing one command")]
    AmbiguousAction(usize),
    #[error("the ```bash code block is empty; put one command inside it")]
    EmptyAction,
}

pub fn parse_action(model_output: &str) -> Result<Action, ActionError> {
    let blocks: Vec<_> = BASH_BLOCK.captures_iter(model_output).collect();
    match blocks.as_slice() {
        [] => Err(ActionError::NoActionFound),
        [one] => {
            let command = one[1].trim();
            if command.is_empty() {
                return Err(ActionError::EmptyAction);
            }
            Ok(Action { command: command.to_string(), raw_block: one[0].to_string() })
        }
        many => Err(ActionError::AmbiguousAction(many.len())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_block() {
        let a = parse_action("Let me look.\n```bash\nsed -n '1,5p' A.java\n```\n").unwrap();
        assert_eq!(a.command, "sed -n '1,5p' A.java");
        let inline = parse_action("```bash sed -n '1,5p' A.java ```").unwrap();
        assert_eq!(inline.command, "sed -n '1,5p' A.java");
    }

    #[test]
    fn malformed_outputs() {
        assert_eq!(parse_action("I think the bug is on line 3."), Err(ActionError::NoActionFound));
        assert_eq!(parse_action("```python\nprint(1)\n```"), Err(ActionError::NoActionFound));
        assert_eq!(parse_action("```bash\nls\n```\n```bash\npwd\n```"), Err(ActionError::AmbiguousAction(2)));
        assert_eq!(parse_action("```bash\n   \n```"), Err(ActionError::EmptyAction));
    }
}
