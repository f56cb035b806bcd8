//! Minimal double-brace template engine.
//!
//! Supports `{{ name }}` substitution and `{% if name %} ... {% else %} ...
//! {% endif %}` blocks (nestable). A variable is truthy when bound to a
//! non-empty string. A newline directly after a block tag is dropped, so
//! block tags on their own lines leave no blank lines behind.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unbound template placeholder `{0}`")]
    Unbound(String),
    #[error("template syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
}

impl TemplateError {
    /// Name of the unbound placeholder, if that is the failure.
    pub fn placeholder(&self) -> Option<&str> {
        match self {
            Self::Unbound(name) => Some(name),
            Self::Syntax { .. } => None,
        }
    }
}

#[derive(Debug)]
enum Node<'a> {
    Text(&'a str),
    Var(&'a str),
    If { name: &'a str, then: Vec<Node<'a>>, otherwise: Vec<Node<'a>> },
}

enum Tag<'a> {
    If(&'a str),
    Else,
    EndIf,
}

fn syntax(offset: usize, message: impl Into<String>) -> TemplateError {
    TemplateError::Syntax { offset, message: message.into() }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    /// Parse nodes until a block tag that closes the current level.
    fn nodes(&mut self) -> Result<(Vec<Node<'a>>, Option<(Tag<'a>, usize)>), TemplateError> {
        let mut out = Vec::new();
        loop {
            let rest = &self.src[self.pos..];
            let next = [rest.find("{{"), rest.find("{%")].into_iter().flatten().min();
            let Some(rel) = next else {
                if !rest.is_empty() {
                    out.push(Node::Text(rest));
                }
                self.pos = self.src.len();
                return Ok((out, None));
            };
            if rel > 0 {
                out.push(Node::Text(&rest[..rel]));
            }
            let start = self.pos + rel;
            let is_var = rest[rel..].starts_with("{{");
            let close = if is_var { "}}" } else { "%}" };
            let inner_start = start + 2;
            let end = self.src[inner_start..]
                .find(close)
                .map(|i| inner_start + i)
                .ok_or_else(|| syntax(start, format!("missing `{close}`")))?;
            let inner = self.src[inner_start..end].trim();
            self.pos = end + 2;
            if is_var {
                if !is_ident(inner) {
                    return Err(syntax(start, format!("invalid placeholder `{inner}`")));
                }
                out.push(Node::Var(inner));
                continue;
            }
            if self.src[self.pos..].starts_with('\n') {
                self.pos += 1;
            }
            let mut words = inner.split_whitespace();
            let tag = match (words.next(), words.next(), words.next()) {
                (Some("if"), Some(name), None) if is_ident(name) => Tag::If(name),
                (Some("else"), None, None) => Tag::Else,
                (Some("endif"), None, None) => Tag::EndIf,
                _ => return Err(syntax(start, format!("unsupported block tag `{inner}`"))),
            };
            match tag {
                Tag::If(name) => {
                    let (then, closer) = self.nodes()?;
                    let otherwise = match closer {
                        Some((Tag::EndIf, _)) => Vec::new(),
                        Some((Tag::Else, at)) => match self.nodes()? {
                            (nodes, Some((Tag::EndIf, _))) => nodes,
                            _ => return Err(syntax(at, "`else` without matching `endif`")),
                        },
                        _ => return Err(syntax(start, "`if` without matching `endif`")),
                    };
                    out.push(Node::If { name, then, otherwise });
                }
                other => return Ok((out, Some((other, start)))),
            }
        }
    }
}

fn eval(nodes: &[Node<'_>], vars: &BTreeMap<String, String>, out: &mut String) -> Result<(), TemplateError> {
    for node in nodes {
        match node {
            Node::Text(t) => out.push_str(t),
            Node::Var(name) => out.push_str(vars.get(*name).ok_or_else(|| TemplateError::Unbound(name.to_string()))?),
            Node::If { name, then, otherwise } => {
                let truthy = vars.get(*name).is_some_and(|v| !v.is_empty());
                eval(if truthy { then } else { otherwise }, vars, out)?;
            }
        }
    }
    Ok(())
}

pub fn render_template(template: &str, vars: &BTreeMap<String, String>) -> Result<String, TemplateError> {
    let mut parser = Parser { src: template, pos: 0 };
    let nodes = match parser.nodes()? {
        (nodes, None) => nodes,
        (_, Some((_, at))) => return Err(syntax(at, "block tag without matching `if`")),
    };
    let mut out = String::with_capacity(template.len());
    eval(&nodes, vars, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn substitutes_with_or_without_spaces() {
        let out = render_template("at `{{ repo_path }}` and {{repo_path}}", &vars(&[("repo_path", "/w")])).unwrap();
        assert_eq!(out, "at `/w` and /w");
    }

    #[test]
    fn unbound_names_the_placeholder() {
        let err = render_template("x {{ repo_path }}", &BTreeMap::new()).unwrap_err();
        assert_eq!(err.placeholder(), Some("repo_path"));
    }

    #[test]
    fn conditional_blocks_trim_their_newline() {
        let t = "a\n{% if h %}\nH={{ h }}\n{% else %}\nnone\n{% endif %}\nz\n";
        assert_eq!(render_template(t, &vars(&[("h", "1")])).unwrap(), "a\nH=1\nz\n");
        assert_eq!(render_template(t, &BTreeMap::new()).unwrap(), "a\nnone\nz\n");
        assert_eq!(render_template(t, &vars(&[("h", "")])).unwrap(), "a\nnone\nz\n");
    }

    #[test]
    fn unbound_inside_skipped_branch_is_fine() {
        let t = "{% if h %}{{ missing }}{% endif %}ok";
        assert_eq!(render_template(t, &BTreeMap::new()).unwrap(), "ok");
    }

    #[test]
    fn nesting_and_syntax_errors() {
        let t = "{% if a %}{% if b %}AB{% endif %}A{% endif %}";
        assert_eq!(render_template(t, &vars(&[("a", "1"), ("b", "1")])).unwrap(), "ABA");
        assert_eq!(render_template(t, &vars(&[("a", "1")])).unwrap(), "A");
        assert!(matches!(render_template("{% if a %}x", &BTreeMap::new()), Err(TemplateError::Syntax { .. })));
        assert!(matches!(render_template("{% endif %}", &BTreeMap::new()), Err(TemplateError::Syntax { .. })));
        assert!(matches!(render_template("{{ a", &BTreeMap::new()), Err(TemplateError::Syntax { .. })));
        assert!(matches!(render_template("{% for x %}", &BTreeMap::new()), Err(TemplateError::Syntax { .. })));
    }
}
