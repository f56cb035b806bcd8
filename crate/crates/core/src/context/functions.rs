//! Function boundary detection for C-family sources.
//!
//! The default detector masks comments, string literals and preprocessor
//! lines, matches braces, and treats a `{` as a function body when the text
//! before it (back to the previous `;`, `{` or `}`) ends in a parameter list,
//! optionally followed by `throws ...` or `const`. Control-flow keywords and
//! anonymous class bodies (`new T() {`) are rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanSource {
    Detected,
    /// Fixed window around a line, used when detection failed.
    Window,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpan {
    pub file_path: String,
    pub name: String,
    pub start_line: u32,
    pub end_line: u32,
    pub body_text: String,
    pub source: SpanSource,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: String,
    pub start_line: u32,
    pub end_line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpanError {
    #[error("line {0} is outside the file")]
    InvalidLine(u32),
    #[error("line is not inside any function")]
    NotInFunction,
    #[error("function detection failed: {0}")]
    DetectorFailure(String),
}

pub trait BoundaryDetector: Send + Sync {
    /// Named functions of `text`, ordered by start line.
    fn functions(&self, text: &str) -> Result<Vec<FunctionDef>, SpanError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CFamilyDetector;

const NOT_FUNCTIONS: &[&str] = &[
    "if", "for", "while", "switch", "catch", "synchronized", "return", "new", "else", "do", "try",
    "finally", "foreach", "using", "lock", "sizeof", "throw", "case", "assert",
];

impl BoundaryDetector for CFamilyDetector {
    fn functions(&self, text: &str) -> Result<Vec<FunctionDef>, SpanError> {
        let masked = mask(text);
        let chars: Vec<char> = masked.chars().collect();
        let mut line_of = Vec::with_capacity(chars.len());
        let mut line = 1u32;
        for &c in &chars {
            line_of.push(line);
            if c == '\n' {
                line += 1;
            }
        }

        let mut stack: Vec<(usize, Option<(String, usize)>)> = Vec::new();
        let mut out = Vec::new();
        let mut last_delim: usize = 0;
        let mut has_delim = false;
        for (i, &c) in chars.iter().enumerate() {
            match c {
                '{' => {
                    let header_start = if has_delim { last_delim + 1 } else { 0 };
                    let header: String = chars[header_start..i].iter().collect();
                    let sig = signature(&header).map(|(name, offset)| (name, header_start + offset));
                    stack.push((i, sig));
                    last_delim = i;
                    has_delim = true;
                }
                '}' => {
                    let (_, sig) = stack
                        .pop()
                        .ok_or_else(|| SpanError::DetectorFailure(format!("unmatched `}}` on line {}", line_of[i])))?;
                    if let Some((name, start)) = sig {
                        out.push(FunctionDef { name, start_line: line_of[start], end_line: line_of[i] });
                    }
                    last_delim = i;
                    has_delim = true;
                }
                ';' => {
                    last_delim = i;
                    has_delim = true;
                }
                _ => {}
            }
        }
        if let Some((open, _)) = stack.last() {
            return Err(SpanError::DetectorFailure(format!("unclosed `{{` on line {}", line_of[*open])));
        }
        out.sort_by_key(|f| (f.start_line, std::cmp::Reverse(f.end_line)));
        Ok(out)
    }
}

/// Replace comments, literal contents and preprocessor lines with spaces,
/// keeping newlines so offsets and line numbers are preserved.
fn mask(text: &str) -> String {
    #[derive(PartialEq)]
    enum St {
        Code,
        Line,
        Block,
        Str(char),
    }
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut st = St::Code;
    let mut at_line_start = true;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if c == '\n' {
            out.push('\n');
            if st == St::Line {
                st = St::Code;
            }
            at_line_start = true;
            i += 1;
            continue;
        }
        match st {
            St::Code => {
                if at_line_start && c == '#' {
                    st = St::Line;
                    out.push(' ');
                } else if c == '/' && next == Some('/') {
                    st = St::Line;
                    out.push_str("  ");
                    i += 1;
                } else if c == '/' && next == Some('*') {
                    st = St::Block;
                    out.push_str("  ");
                    i += 1;
                } else if c == '"' || c == '\'' {
                    st = St::Str(c);
                    out.push(c);
                } else {
                    out.push(c);
                }
            }
            St::Line => out.push(' '),
            St::Block => {
                if c == '*' && next == Some('/') {
                    st = St::Code;
                    out.push_str("  ");
                    i += 1;
                } else {
                    out.push(' ');
                }
            }
            St::Str(q) => {
                if c == '\\' && next.is_some() && next != Some('\n') {
                    out.push_str("  ");
                    i += 1;
                } else if c == q {
                    st = St::Code;
                    out.push(c);
                } else {
                    out.push(' ');
                }
            }
        }
        if !c.is_whitespace() {
            at_line_start = false;
        }
        i += 1;
    }
    out
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Name of the function declared by `header` and the char offset at which
/// the declaration starts (after leading annotations), if it is one.
fn signature(header: &str) -> Option<(String, usize)> {
    let chars: Vec<char> = header.chars().collect();
    let mut end = chars.len();
    while end > 0 && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    // optional trailing `throws A, B` / `const` / `noexcept`
    let tail: String = chars[..end].iter().collect();
    let trimmed_tail = strip_trailer(&tail);
    end = trimmed_tail.chars().count();
    while end > 0 && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    if end == 0 || chars[end - 1] != ')' {
        return None;
    }
    let mut depth = 0i32;
    let mut open = None;
    for j in (0..end).rev() {
        match chars[j] {
            ')' => depth += 1,
            '(' => {
                depth -= 1;
                if depth == 0 {
                    open = Some(j);
                    break;
                }
            }
            _ => {}
        }
    }
    let open = open?;
    let mut k = open;
    while k > 0 && chars[k - 1].is_whitespace() {
        k -= 1;
    }
    let name_end = k;
    while k > 0 && is_ident_char(chars[k - 1]) {
        k -= 1;
    }
    if k == name_end {
        return None;
    }
    let name: String = chars[k..name_end].iter().collect();
    if NOT_FUNCTIONS.contains(&name.as_str()) || name.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        return None;
    }
    let start = declaration_start(&chars[..k]);
    let before: String = chars[start..k].iter().collect();
    let prev_word: String = before
        .trim_end()
        .chars()
        .rev()
        .take_while(|&c| is_ident_char(c))
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    if prev_word == "new" || before.contains('=') || before.trim_end().ends_with('.') {
        return None;
    }
    Some((name, start))
}

fn strip_trailer(tail: &str) -> String {
    let t = tail.trim_end();
    for kw in ["const", "noexcept", "override", "final"] {
        if let Some(rest) = t.strip_suffix(kw) {
            if rest.ends_with(|c: char| c.is_whitespace() || c == ')') {
                return strip_trailer(rest);
            }
        }
    }
    if let Some(pos) = t.rfind("throws") {
        let (head, rest) = t.split_at(pos);
        let list = &rest["throws".len()..];
        let boundary_ok = head.ends_with(|c: char| c.is_whitespace() || c == ')');
        if boundary_ok && list.chars().all(|c| is_ident_char(c) || c.is_whitespace() || ",.<>".contains(c)) {
            return head.to_string();
        }
    }
    t.to_string()
}

/// Offset of the first character after leading whitespace and annotations.
fn declaration_start(prefix: &[char]) -> usize {
    let mut i = 0;
    loop {
        while i < prefix.len() && prefix[i].is_whitespace() {
            i += 1;
        }
        if i < prefix.len() && prefix[i] == '@' {
            i += 1;
            while i < prefix.len() && (is_ident_char(prefix[i]) || prefix[i] == '.') {
                i += 1;
            }
            let mut j = i;
            while j < prefix.len() && prefix[j].is_whitespace() {
                j += 1;
            }
            if j < prefix.len() && prefix[j] == '(' {
                let mut depth = 0;
                while j < prefix.len() {
                    match prefix[j] {
                        '(' => depth += 1,
                        ')' => {
                            depth -= 1;
                            if depth == 0 {
                                j += 1;
                                break;
                            }
                        }
                        _ => {}
                    }
                    j += 1;
                }
                i = j;
            }
            continue;
        }
        return i;
    }
}

/// Exact text of lines `start..=end` (1-based), terminators included.
pub fn slice_lines(text: &str, start: u32, end: u32) -> String {
    text.split_inclusive('\n')
        .enumerate()
        .filter(|(i, _)| (start as usize..=end as usize).contains(&(i + 1)))
        .map(|(_, l)| l)
        .collect()
}

/// Innermost named function containing `line`.
pub fn detect_function_span(
    detector: &dyn BoundaryDetector,
    file_path: &str,
    text: &str,
    line: u32,
) -> Result<FunctionSpan, SpanError> {
    let count = text.lines().count() as u32;
    if line == 0 || line > count {
        return Err(SpanError::InvalidLine(line));
    }
    let defs = detector.functions(text)?;
    let def = defs
        .iter()
        .filter(|d| d.start_line <= line && line <= d.end_line)
        .max_by_key(|d| (d.start_line, std::cmp::Reverse(d.end_line)))
        .ok_or(SpanError::NotInFunction)?;
    Ok(span_for(file_path, text, def))
}

pub fn span_for(file_path: &str, text: &str, def: &FunctionDef) -> FunctionSpan {
    FunctionSpan {
        file_path: file_path.to_string(),
        name: def.name.clone(),
        start_line: def.start_line,
        end_line: def.end_line,
        body_text: slice_lines(text, def.start_line, def.end_line),
        source: SpanSource::Detected,
    }
}

/// Degraded span: `radius` lines either side of `line`, clamped to the file.
pub fn window_span(file_path: &str, text: &str, line: u32, radius: u32) -> FunctionSpan {
    let count = (text.lines().count() as u32).max(1);
    let start = line.saturating_sub(radius).max(1);
    let end = (line + radius).min(count);
    FunctionSpan {
        file_path: file_path.to_string(),
        name: format!("<lines {start}-{end}>"),
        start_line: start,
        end_line: end,
        body_text: slice_lines(text, start, end),
        source: SpanSource::Window,
    }
}

/// Distinct function names in order of first appearance.
pub fn function_names(detector: &dyn BoundaryDetector, text: &str) -> Result<Vec<String>, SpanError> {
    let mut names: Vec<String> = Vec::new();
    for d in detector.functions(text)? {
        if !names.contains(&d.name) {
            names.push(d.name);
        }
    }
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;

    const JAVA: &str = r#"package p;

import java.util.List;

/**
 * Docs { with braces }
 */
public class Calc {
    private int[] table = { 1, 2, 3 };
    private String s = "}{";

    @Override
    public String toString() {
        return "Calc";
    }

    public <T> int add(int a,
                       int b) throws IllegalStateException {
        if (a > 0) {
            return a + b;
        } else if (b > 0) {
            return b;
        }
        Runnable r = new Runnable() {
            public void run() {
                System.out.println("x");
            }
        };
        return 0;
    }

    Calc() {
        // ctor
    }
}
"#;

    #[test]
    fn finds_java_methods() {
        let defs = CFamilyDetector.functions(JAVA).unwrap();
        let names: Vec<(&str, u32, u32)> = defs.iter().map(|d| (d.name.as_str(), d.start_line, d.end_line)).collect();
        assert_eq!(
            names,
            vec![("toString", 13, 15), ("add", 17, 30), ("run", 25, 27), ("Calc", 32, 34)]
        );
    }

    #[test]
    fn innermost_span_and_exact_slice() {
        let span = detect_function_span(&CFamilyDetector, "Calc.java", JAVA, 26).unwrap();
        assert_eq!(span.name, "run");
        assert_eq!(span.body_text, slice_lines(JAVA, 25, 27));
        assert!(span.body_text.ends_with("}\n"));
        let outer = detect_function_span(&CFamilyDetector, "Calc.java", JAVA, 19).unwrap();
        assert_eq!(outer.name, "add");
        assert_eq!(outer.start_line, 17);
    }

    #[test]
    fn field_is_not_in_function() {
        assert_eq!(detect_function_span(&CFamilyDetector, "C.java", JAVA, 9), Err(SpanError::NotInFunction));
    }

    #[test]
    fn line_zero_is_rejected() {
        assert_eq!(detect_function_span(&CFamilyDetector, "C.java", JAVA, 0), Err(SpanError::InvalidLine(0)));
    }

    #[test]
    fn unbalanced_braces_fail() {
        let err = CFamilyDetector.functions("void f() {\n  if (x) {\n}\n").unwrap_err();
        assert!(matches!(err, SpanError::DetectorFailure(_)));
        assert!(CFamilyDetector.functions("}\n").is_err());
    }

    #[test]
    fn c_functions_skip_preprocessor_lines() {
        let src = "#include <stdio.h>\n#define X(a) (a)\n\nstatic int add(int a, int b)\n{\n    return a + b;\n}\n\nint main(void) {\n    return add(1, 2);\n}\n";
        let defs = CFamilyDetector.functions(src).unwrap();
        assert_eq!(defs[0], FunctionDef { name: "add".into(), start_line: 4, end_line: 7 });
        assert_eq!(defs[1].name, "main");
    }

    #[test]
    fn lambdas_are_anonymous() {
        let src = "void f() {\n    list.forEach(x -> {\n        g(x);\n    });\n}\n";
        let names = function_names(&CFamilyDetector, src).unwrap();
        assert_eq!(names, vec!["f"]);
    }

    #[test]
    fn window_is_clamped() {
        let text = "a\nb\nc\n";
        let w = window_span("f", text, 2, 20);
        assert_eq!((w.start_line, w.end_line), (1, 3));
        assert_eq!(w.body_text, text);
        assert_eq!(w.source, SpanSource::Window);
    }
}
