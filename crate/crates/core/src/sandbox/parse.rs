//! Test-runner output parsers, keyed by parser id.
//!
//! Both bundled formats report `Failing tests: N` followed by N lines of
//! `  - name`. The `simple` parser expects exactly that report; the
//! `defects4j` parser tolerates build noise around it and uses the last
//! report.

use once_cell::sync::Lazy;
use regex::Regex;

use super::TestOutcome;

pub const PARSER_IDS: &[&str] = &["simple", "defects4j"];

const EXCERPT_CHARS: usize = 2_000;

static COUNT: Lazy<Regex> = Lazy::new(|| Regex::new(r"^Failing tests: (\d+)\s*$").unwrap());
static NAME: Lazy<Regex> = Lazy::new(|| Regex::new(r"^  - (\S.*?)\s*$").unwrap());

pub(crate) fn excerpt(output: &str) -> String {
    let n = output.chars().count();
    output.chars().skip(n.saturating_sub(EXCERPT_CHARS)).collect()
}

pub fn parse_test_output(parser_id: &str, output: &str) -> Result<TestOutcome, String> {
    let lines: Vec<&str> = output.lines().collect();
    let reports: Vec<usize> = lines.iter().enumerate().filter(|(_, l)| COUNT.is_match(l)).map(|(i, _)| i).collect();
    let at = match (parser_id, reports.as_slice()) {
        (_, []) => return Err("no `Failing tests: N` line in test output".into()),
        ("simple", [one]) => *one,
        ("simple", _) => return Err("more than one `Failing tests` report".into()),
        ("defects4j", [.., last]) => *last,
        (other, _) => return Err(format!("unknown test parser `{other}`")),
    };
    let count: usize = COUNT.captures(lines[at]).unwrap()[1]
        .parse()
        .map_err(|_| "failing-test count out of range".to_string())?;
    let names: Vec<String> = lines[at + 1..]
        .iter()
        .map_while(|l| NAME.captures(l).map(|c| c[1].to_string()))
        .collect();
    if names.len() != count {
        return Err(format!("report claims {count} failing tests but lists {}", names.len()));
    }
    Ok(TestOutcome::new(names, excerpt(output)))
}
