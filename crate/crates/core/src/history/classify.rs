//! Executable-line classification for the fallback anchor search.
//!
//! A line counts as executable when, once comments are removed and
//! annotations (`@Name` or `@Name(...)`) are dropped, something other than
//! braces, parentheses, semicolons and whitespace remains. Block-comment state
//! is carried across lines, so classification runs over the whole file.

/// One flag per line of `text` (index 0 is line 1).
pub fn executable_lines(text: &str) -> Vec<bool> {
    let mut in_block = false;
    text.lines()
        .map(|line| {
            let code = strip_comments(line, &mut in_block);
            is_executable_code(&code)
        })
        .collect()
}

fn strip_comments(line: &str, in_block: &mut bool) -> String {
    let chars: Vec<char> = line.chars().collect();
    let mut out = String::with_capacity(line.len());
    let mut i = 0;
    let mut quote: Option<char> = None;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if *in_block {
            if c == '*' && next == Some('/') {
                *in_block = false;
                i += 2;
            } else {
                i += 1;
            }
            continue;
        }
        if let Some(q) = quote {
            out.push(c);
            if c == '\\' {
                if let Some(n) = next {
                    out.push(n);
                    i += 2;
                    continue;
                }
            } else if c == q {
                quote = None;
            }
            i += 1;
            continue;
        }
        match (c, next) {
            ('/', Some('/')) => break,
            ('/', Some('*')) => {
                *in_block = true;
                i += 2;
            }
            ('"', _) | ('\'', _) => {
                quote = Some(c);
                out.push(c);
                i += 1;
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    out.trim_end().to_string()
}

fn is_executable_code(code: &str) -> bool {
    let chars: Vec<char> = code.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '@' {
            // skip the annotation name and an optional argument list
            i += 1;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '.') {
                i += 1;
            }
            let mut j = i;
            while j < chars.len() && chars[j].is_whitespace() {
                j += 1;
            }
            if j < chars.len() && chars[j] == '(' {
                let mut depth = 0;
                while j < chars.len() {
                    match chars[j] {
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
        if !(c.is_whitespace() || matches!(c, '{' | '}' | '(' | ')' | ';')) {
            return true;
        }
        i += 1;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classify(src: &str) -> Vec<bool> {
        executable_lines(src)
    }

    #[test]
    fn symbols_and_comments_are_not_executable() {
        let src = "}\n  );\n// note\n/* a\n still comment\n*/\n\n{ }\n";
        assert!(classify(src).iter().all(|e| !e));
    }

    #[test]
    fn statements_are_executable() {
        let src = "return x;\nint a = 1; // trailing\n} else {\n";
        assert_eq!(classify(src), vec![true, true, true]);
    }

    #[test]
    fn annotations_are_markers() {
        let src = "@Override\n@SuppressWarnings(\"unchecked\")\n@Test public void t() {\n";
        assert_eq!(classify(src), vec![false, false, true]);
    }

    #[test]
    fn comment_markers_inside_strings_are_code() {
        let src = "String u = \"http://x\"; /* c */\n\"/*\";\nx = 1;\n";
        assert_eq!(classify(src), vec![true, true, true]);
    }

    #[test]
    fn block_comment_state_carries_over() {
        let src = "x = 1; /* start\nreturn y;\nend */ y = 2;\n";
        assert_eq!(classify(src), vec![true, false, true]);
    }
}
