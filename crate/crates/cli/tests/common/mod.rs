//! Helpers shared by the integration and acceptance suites.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub fn mcembed(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mcembed"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn mcembed")
}

pub fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = mcembed(dir, args);
    assert!(
        out.status.success(),
        "mcembed {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

pub fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

/// Two documents covering the labeling rules: animate chains, inanimate
/// chains with a multi-word markable, a conflicted chain, and a chain
/// whose mentions all touch a sentence boundary.
pub const CONLL_FIXTURE: &str = "\
#begin document (fixtures/one); part 000
t1 0 0 he (1)
t1 0 1 helped -
t1 0 2 anna (1)
t1 0 3 to -
t1 0 4 relax -

t1 0 0 she (2)
t1 0 1 helped -
t1 0 2 bora (2)
t1 0 3 to -
t1 0 4 win -

#end document
#begin document (fixtures/two); part 000
t2 0 0 it (3)
t2 0 1 stalled -
t2 0 2 near -
t2 0 3 the (3
t2 0 4 base 3)
t2 0 5 today -

t2 0 0 it (4)
t2 0 1 jammed -
t2 0 2 into -
t2 0 3 soft -
t2 0 4 mud (4)
t2 0 5 there -

t2 0 0 he (5)
t2 0 1 argued -
t2 0 2 it (5)
t2 0 3 is -
t2 0 4 fine -

t2 0 0 him (6)
t2 0 1 saw -
t2 0 2 spot -
t2 0 3 run (6)

#end document
";

/// The raw sentences of [`CONLL_FIXTURE`], usable as a plain corpus.
pub const CONLL_SENTENCES: [&str; 6] = [
    "he helped anna to relax",
    "she helped bora to win",
    "it stalled near the base today",
    "it jammed into soft mud there",
    "he argued it is fine",
    "him saw spot run",
];

/// Column lookup in a TSV report written by `mcembed eval`.
pub struct Report {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Report {
    pub fn parse(text: &str) -> Report {
        let mut lines = text.lines();
        let header = lines
            .next()
            .expect("report header")
            .split('\t')
            .map(str::to_owned)
            .collect();
        let rows = lines
            .map(|l| l.split('\t').map(str::to_owned).collect())
            .collect();
        Report { header, rows }
    }

    pub fn get(&self, system: &str, column: &str) -> &str {
        let col = self
            .header
            .iter()
            .position(|h| h == column)
            .unwrap_or_else(|| panic!("no column {column:?} in {:?}", self.header));
        let row = self
            .rows
            .iter()
            .find(|r| r[0] == system)
            .unwrap_or_else(|| panic!("no system {system:?}"));
        &row[col]
    }

    pub fn get_f64(&self, system: &str, column: &str) -> f64 {
        self.get(system, column).parse().expect("numeric field")
    }
}
