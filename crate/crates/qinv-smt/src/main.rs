//! Command-line entry point: reads SMT-LIB2 commands from files given as
//! arguments, or from stdin when none are given, and prints replies to
//! stdout. Errors are reported SMT-LIB style as `(error "...")` without
//! aborting the session, so a driving process can keep the pipe open.

use std::io::{BufRead, Write};

use qinv_smt::sexp::Reader;
use qinv_smt::{Context, Outcome};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--help" || a == "-h") {
        println!("usage: qinv-smt [FILE...]");
        println!("Reads SMT-LIB2 commands from FILEs, or stdin if none given.");
        return;
    }
    let mut ctx = Context::new();
    if args.is_empty() {
        run_stdin(&mut ctx);
    } else {
        for path in &args {
            match std::fs::read_to_string(path) {
                Ok(src) => {
                    if !run_source(&mut ctx, &src) {
                        return;
                    }
                }
                Err(e) => {
                    println!("(error \"cannot read {path}: {e}\")");
                    std::process::exit(1);
                }
            }
        }
    }
}

fn run_stdin(ctx: &mut Context) {
    let stdin = std::io::stdin();
    let mut reader = Reader::new();
    for line in stdin.lock().lines() {
        let line = match line {
            Ok(l) => l,
            Err(_) => break,
        };
        reader.push_line(&line);
        loop {
            match reader.next_sexp() {
                Ok(Some(cmd)) => {
                    if !dispatch(ctx, &cmd) {
                        return;
                    }
                }
                Ok(None) => break,
                Err(e) => {
                    println!("(error \"{e}\")");
                    return;
                }
            }
        }
        // The driving process reads replies line by line; make sure they
        // are visible before we block on the next command.
        let _ = std::io::stdout().flush();
    }
}

fn run_source(ctx: &mut Context, src: &str) -> bool {
    let mut reader = Reader::new();
    reader.push_line(src);
    loop {
        match reader.next_sexp() {
            Ok(Some(cmd)) => {
                if !dispatch(ctx, &cmd) {
                    return false;
                }
            }
            Ok(None) => return true,
            Err(e) => {
                println!("(error \"{e}\")");
                return false;
            }
        }
    }
}

/// Executes one command; false means exit was requested.
fn dispatch(ctx: &mut Context, cmd: &qinv_smt::sexp::SExp) -> bool {
    match ctx.exec(cmd) {
        Ok(Outcome::Reply(lines)) => {
            for l in lines {
                println!("{l}");
            }
            true
        }
        Ok(Outcome::Exit) => false,
        Err(e) => {
            let msg = e.replace('"', "'");
            println!("(error \"{msg}\")");
            true
        }
    }
}
