//! The shipped benchmark corpus must parse, print canonically, and
//! round-trip through the parser.

use std::fs;
use std::path::PathBuf;

use qinv_core::parser::{parse_program, parse_property, print_program};

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

#[test]
fn every_program_parses_and_round_trips() {
    let mut programs = 0;
    for entry in fs::read_dir(corpus_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().map(|e| e != "pgcl").unwrap_or(true) {
            continue;
        }
        programs += 1;
        let text = fs::read_to_string(&path).unwrap();
        let prog = parse_program(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let printed = print_program(&prog);
        let reparsed = parse_program(&printed)
            .unwrap_or_else(|e| panic!("{} reprint: {e}", path.display()));
        assert_eq!(prog, reparsed, "{} round trip", path.display());
    }
    assert_eq!(programs, 13);
}

#[test]
fn every_property_parses_against_its_program() {
    let mut props = 0;
    for entry in fs::read_dir(corpus_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().map(|e| e != "prop").unwrap_or(true) {
            continue;
        }
        props += 1;
        let stem = path.file_name().unwrap().to_str().unwrap();
        let base = stem.split('.').next().unwrap();
        let prog_path = corpus_dir().join(format!("{base}.pgcl"));
        let prog = parse_program(&fs::read_to_string(&prog_path).unwrap()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        parse_property(&text, &prog.decls)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
    assert_eq!(props, 30);
}
