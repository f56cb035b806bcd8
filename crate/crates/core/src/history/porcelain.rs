//! Parser for `git blame --porcelain` / `--line-porcelain` output.
//!
//! Commit headers may arrive in any order and are only printed the first
//! time a commit is seen in `--porcelain` mode, so they are cached per
//! commit. Any header key we do not know is an error rather than a skip.

use std::collections::HashMap;

use super::HistoryError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommitHeader {
    pub author: String,
    pub author_mail: String,
    pub author_time: i64,
    pub author_tz: String,
    pub committer: String,
    pub committer_mail: String,
    pub committer_time: i64,
    pub committer_tz: String,
    pub summary: String,
    pub boundary: bool,
    pub previous: Option<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PorcelainLine {
    pub commit: String,
    pub orig_line: u32,
    pub final_line: u32,
    pub filename: String,
    pub content: String,
    pub header: CommitHeader,
}

fn bad(msg: impl Into<String>) -> HistoryError {
    HistoryError::PorcelainParse(msg.into())
}

fn is_hash(s: &str) -> bool {
    s.len() >= 40 && s.bytes().all(|b| b.is_ascii_hexdigit())
}

pub fn parse(output: &str) -> Result<Vec<PorcelainLine>, HistoryError> {
    let mut headers: HashMap<String, CommitHeader> = HashMap::new();
    let mut filenames: HashMap<String, String> = HashMap::new();
    let mut out = Vec::new();
    let mut lines = output.lines().peekable();

    while let Some(first) = lines.next() {
        if first.is_empty() {
            continue;
        }
        let mut parts = first.split(' ');
        let commit = parts.next().unwrap_or_default().to_string();
        if !is_hash(&commit) {
            return Err(bad(format!("expected commit line, got `{first}`")));
        }
        let orig_line: u32 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("missing original line number in `{first}`")))?;
        let final_line: u32 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("missing final line number in `{first}`")))?;

        let mut header = headers.get(&commit).cloned().unwrap_or_default();
        let mut filename = filenames.get(&commit).cloned();
        let content = loop {
            let line = lines.next().ok_or_else(|| bad("unexpected end of porcelain output"))?;
            if let Some(content) = line.strip_prefix('\t') {
                break content.to_string();
            }
            let (key, value) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "author" => header.author = value.to_string(),
                "author-mail" => header.author_mail = value.to_string(),
                "author-time" => header.author_time = parse_time(value)?,
                "author-tz" => header.author_tz = value.to_string(),
                "committer" => header.committer = value.to_string(),
                "committer-mail" => header.committer_mail = value.to_string(),
                "committer-time" => header.committer_time = parse_time(value)?,
                "committer-tz" => header.committer_tz = value.to_string(),
                "summary" => header.summary = value.to_string(),
                "boundary" => header.boundary = true,
                "previous" => {
                    let (hash, path) = value
                        .split_once(' ')
                        .ok_or_else(|| bad(format!("malformed previous record `{value}`")))?;
                    header.previous = Some((hash.to_string(), path.to_string()));
                }
                "filename" => filename = Some(value.to_string()),
                other => return Err(bad(format!("unknown record type `{other}`"))),
            }
        };
        let filename = filename.ok_or_else(|| bad(format!("no filename for commit {commit}")))?;
        headers.insert(commit.clone(), header.clone());
        filenames.insert(commit.clone(), filename.clone());
        out.push(PorcelainLine { commit, orig_line, final_line, filename, content, header });
    }
    Ok(out)
}

fn parse_time(value: &str) -> Result<i64, HistoryError> {
    value.trim().parse().map_err(|_| bad(format!("bad timestamp `{value}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const C1: &str = "1111111111111111111111111111111111111111";
    const C2: &str = "2222222222222222222222222222222222222222";

    fn sample() -> String {
        format!(
            "{C1} 1 1 2\n\
             author A\nauthor-mail <a@x>\nauthor-time 100\nauthor-tz +0000\n\
             committer A\ncommitter-mail <a@x>\ncommitter-time 100\ncommitter-tz +0000\n\
             summary first\nboundary\nfilename f.c\n\tint a;\n\
             {C1} 2 2\n\tint b;\n\
             {C2} 2 3 1\n\
             summary second\nauthor-time 200\nauthor B\nprevious {C1} f.c\nfilename f.c\n\tint c;\n"
        )
    }

    #[test]
    fn parses_repeated_commits_from_cache() {
        let lines = parse(&sample()).unwrap();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].commit, C1);
        assert_eq!(lines[1].header.author_time, 100);
        assert_eq!(lines[1].filename, "f.c");
        assert_eq!(lines[1].content, "int b;");
        assert!(lines[0].header.boundary);
    }

    #[test]
    fn tolerates_header_reordering() {
        let lines = parse(&sample()).unwrap();
        let third = &lines[2];
        assert_eq!(third.commit, C2);
        assert_eq!((third.orig_line, third.final_line), (2, 3));
        assert_eq!(third.header.author_time, 200);
        assert_eq!(third.header.previous, Some((C1.to_string(), "f.c".to_string())));
    }

    #[test]
    fn unknown_record_type_fails_loudly() {
        let text = format!("{C1} 1 1 1\nauthor A\nmystery-key 1\nfilename f\n\tx\n");
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("mystery-key"), "{err}");
    }

    #[test]
    fn truncated_output_fails() {
        let text = format!("{C1} 1 1 1\nauthor A\n");
        assert!(parse(&text).is_err());
    }
}
