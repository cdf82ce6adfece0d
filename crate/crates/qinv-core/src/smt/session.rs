//! A conversation with an SMT solver over the SMT-LIB2 command language.
//!
//! The bundled solver runs on a background thread by default; pointing
//! the session at an executable (via configuration, or the QINV_SOLVER
//! environment variable) spawns it as a subprocess instead and talks to
//! it over stdin/stdout. Both paths exchange exactly the same command
//! text, which can be teed to a file for inspection.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{Receiver, RecvTimeoutError, Sender};
use std::time::Duration;

use num::BigInt;
use num_traits::Zero;
use qinv_smt::sexp::{Reader, SExp};

use crate::scalar::Rat;
use crate::smt::ir::{Constraint, Sym};
use crate::syntax::Decls;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatResult {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Debug, Clone, Default)]
pub struct SolverConfig {
    /// External solver executable; when absent the bundled solver is
    /// used in process.
    pub path: Option<PathBuf>,
    /// Per-query time limit.
    pub timeout: Option<Duration>,
    /// File receiving a copy of every command sent.
    pub dump: Option<PathBuf>,
}

impl SolverConfig {
    /// Applies the QINV_SOLVER environment variable when no explicit
    /// path is set.
    pub fn resolved(mut self) -> SolverConfig {
        if self.path.is_none() {
            if let Ok(p) = std::env::var("QINV_SOLVER") {
                if !p.is_empty() {
                    self.path = Some(PathBuf::from(p));
                }
            }
        }
        self
    }
}

enum Backend {
    Thread { tx: Sender<String> },
    Process { child: Child, stdin: ChildStdin },
}

/// Errors that end a session; after any of these the session refuses
/// further work.
#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("solver timed out")]
    Timeout,
    #[error("solver session is no longer usable")]
    Dead,
    #[error("could not start solver: {0}")]
    Spawn(String),
    #[error("solver protocol error: {0}")]
    Protocol(String),
}

pub struct Session {
    backend: Backend,
    rx: Receiver<String>,
    timeout: Option<Duration>,
    dump: Option<std::io::BufWriter<std::fs::File>>,
    dead: bool,
    declared: BTreeSet<Sym>,
    scopes: Vec<BTreeSet<Sym>>,
}

impl Session {
    pub fn new(cfg: &SolverConfig) -> Result<Session, SessionError> {
        let (backend, rx) = match &cfg.path {
            None => {
                let (tx_cmd, rx_cmd) = std::sync::mpsc::channel::<String>();
                let (tx_line, rx_line) = std::sync::mpsc::channel::<String>();
                std::thread::spawn(move || run_bundled(rx_cmd, tx_line));
                (Backend::Thread { tx: tx_cmd }, rx_line)
            }
            Some(path) => {
                let mut child = Command::new(path)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::null())
                    .spawn()
                    .map_err(|e| SessionError::Spawn(format!("{}: {e}", path.display())))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let (tx_line, rx_line) = std::sync::mpsc::channel::<String>();
                std::thread::spawn(move || {
                    let reader = BufReader::new(stdout);
                    for line in reader.lines() {
                        match line {
                            Ok(l) => {
                                if tx_line.send(l).is_err() {
                                    break;
                                }
                            }
                            Err(_) => break,
                        }
                    }
                });
                (Backend::Process { child, stdin }, rx_line)
            }
        };
        let dump = match &cfg.dump {
            None => None,
            // append so that every session of a run lands in one file
            Some(p) => Some(std::io::BufWriter::new(
                std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|e| SessionError::Spawn(format!("{}: {e}", p.display())))?,
            )),
        };
        Ok(Session {
            backend,
            rx,
            timeout: cfg.timeout,
            dump,
            dead: false,
            declared: BTreeSet::new(),
            scopes: Vec::new(),
        })
    }

    /// Sends one command; no reply is expected.
    pub fn command(&mut self, cmd: &str) -> Result<(), SessionError> {
        if self.dead {
            return Err(SessionError::Dead);
        }
        if let Some(w) = &mut self.dump {
            let _ = writeln!(w, "{cmd}");
            let _ = w.flush();
        }
        match &mut self.backend {
            Backend::Thread { tx } => {
                if tx.send(cmd.to_string()).is_err() {
                    self.dead = true;
                    return Err(SessionError::Dead);
                }
            }
            Backend::Process { stdin, .. } => {
                if writeln!(stdin, "{cmd}").and_then(|_| stdin.flush()).is_err() {
                    self.dead = true;
                    return Err(SessionError::Dead);
                }
            }
        }
        Ok(())
    }

    fn read_line(&mut self) -> Result<String, SessionError> {
        let got = match self.timeout {
            None => self.rx.recv().map_err(|_| SessionError::Dead),
            Some(t) => self.rx.recv_timeout(t).map_err(|e| match e {
                RecvTimeoutError::Timeout => SessionError::Timeout,
                RecvTimeoutError::Disconnected => SessionError::Dead,
            }),
        };
        match got {
            Ok(l) => Ok(l),
            Err(e) => {
                self.kill();
                Err(e)
            }
        }
    }

    fn kill(&mut self) {
        self.dead = true;
        if let Backend::Process { child, .. } = &mut self.backend {
            let _ = child.kill();
            let _ = child.wait();
        }
    }

    pub fn push(&mut self) -> Result<(), SessionError> {
        self.command("(push 1)")?;
        self.scopes.push(self.declared.clone());
        Ok(())
    }

    pub fn pop(&mut self) -> Result<(), SessionError> {
        self.command("(pop 1)")?;
        if let Some(prev) = self.scopes.pop() {
            self.declared = prev;
        }
        Ok(())
    }

    /// Declares any not yet declared symbols of the constraint and
    /// asserts it.
    pub fn assert_constraint(
        &mut self,
        c: &Constraint,
        decls: &Decls,
    ) -> Result<(), SessionError> {
        for s in c.syms() {
            self.declare(s, decls)?;
        }
        self.command(&format!("(assert {})", c.to_smt(decls)))
    }

    /// Declares a symbol if it is not declared yet. Integer symbols get
    /// a nonnegativity assertion alongside the declaration.
    pub fn declare(&mut self, s: Sym, decls: &Decls) -> Result<(), SessionError> {
        if self.declared.insert(s) {
            let name = s.smt_name(decls);
            let sort = if s.is_int() { "Int" } else { "Real" };
            self.command(&format!("(declare-const {name} {sort})"))?;
            if s.is_int() {
                self.command(&format!("(assert (>= {name} 0))"))?;
            }
        }
        Ok(())
    }

    pub fn check_sat(&mut self) -> Result<SatResult, SessionError> {
        self.command("(check-sat)")?;
        loop {
            let line = self.read_line()?;
            match line.trim() {
                "sat" => return Ok(SatResult::Sat),
                "unsat" => return Ok(SatResult::Unsat),
                "unknown" => return Ok(SatResult::Unknown),
                "" => continue,
                other => {
                    self.kill();
                    return Err(SessionError::Protocol(format!(
                        "unexpected check-sat reply: {other}"
                    )));
                }
            }
        }
    }

    /// Retrieves the model as a map from symbol names to exact values.
    pub fn get_model(&mut self) -> Result<Vec<(String, Rat)>, SessionError> {
        const MARK: &str = "end-of-model";
        self.command("(get-model)")?;
        self.command(&format!("(echo \"{MARK}\")"))?;
        let mut reader = Reader::new();
        let mut sexps = Vec::new();
        loop {
            let line = self.read_line()?;
            if line.trim() == MARK {
                break;
            }
            reader.push_line(&line);
            loop {
                match reader.next_sexp() {
                    Ok(Some(s)) => sexps.push(s),
                    Ok(None) => break,
                    Err(e) => {
                        self.kill();
                        return Err(SessionError::Protocol(format!("bad model text: {e}")));
                    }
                }
            }
        }
        let mut out = Vec::new();
        for s in sexps {
            collect_define_funs(&s, &mut out)?;
        }
        Ok(out)
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        let _ = self.command("(exit)");
        if let Backend::Process { child, .. } = &mut self.backend {
            let _ = child.wait();
        }
    }
}

/// Runs the bundled solver against a channel of command strings.
fn run_bundled(rx: Receiver<String>, tx: Sender<String>) {
    let mut ctx = qinv_smt::Context::new();
    let mut reader = Reader::new();
    while let Ok(cmd) = rx.recv() {
        reader.push_line(&cmd);
        loop {
            match reader.next_sexp() {
                Ok(Some(sexp)) => match ctx.exec(&sexp) {
                    Ok(qinv_smt::Outcome::Reply(lines)) => {
                        for l in lines {
                            if tx.send(l).is_err() {
                                return;
                            }
                        }
                    }
                    Ok(qinv_smt::Outcome::Exit) => return,
                    Err(e) => {
                        if tx.send(format!("(error \"{e}\")")).is_err() {
                            return;
                        }
                    }
                },
                Ok(None) => break,
                Err(e) => {
                    if tx.send(format!("(error \"{e}\")")).is_err() {
                        return;
                    }
                    reader = Reader::new();
                    break;
                }
            }
        }
    }
}

fn collect_define_funs(
    s: &SExp,
    out: &mut Vec<(String, Rat)>,
) -> Result<(), SessionError> {
    let SExp::List(items) = s else { return Ok(()) };
    if let [SExp::Atom(head), SExp::Atom(name), SExp::List(args), _sort, value] =
        items.as_slice()
    {
        if head == "define-fun" && args.is_empty() {
            let v = value_to_rat(value).map_err(SessionError::Protocol)?;
            out.push((name.clone(), v));
            return Ok(());
        }
    }
    // models arrive as a list wrapping the define-funs
    for item in items {
        collect_define_funs(item, out)?;
    }
    Ok(())
}

/// Decodes a model value: integer or decimal literals, `(- v)`, and
/// `(/ p q)`.
pub fn value_to_rat(s: &SExp) -> Result<Rat, String> {
    match s {
        SExp::Atom(a) => crate::scalar::parse_rat(a),
        SExp::List(items) => match items.as_slice() {
            [SExp::Atom(op), inner] if op == "-" => Ok(-value_to_rat(inner)?),
            [SExp::Atom(op), p, q] if op == "/" => {
                let num = value_to_rat(p)?;
                let den = value_to_rat(q)?;
                if den.is_zero() {
                    return Err("division by zero in model value".to_string());
                }
                Ok(num / den)
            }
            _ => Err(format!("unsupported model value: {s}")),
        },
    }
}

/// Looks up a symbol's value in a decoded model, defaulting to zero for
/// symbols the solver left unconstrained.
pub fn model_value(model: &[(String, Rat)], name: &str) -> Rat {
    model
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, v)| v.clone())
        .unwrap_or_else(|| Rat::from_integer(BigInt::from(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smt::ir::{Atom, Rel};
    use std::collections::BTreeMap;

    fn decls_x() -> Decls {
        let mut d = Decls::new();
        d.declare("x", 0, None).unwrap();
        d
    }

    #[test]
    fn bundled_round_trip() {
        let d = decls_x();
        let mut s = Session::new(&SolverConfig::default()).unwrap();
        // x >= 3 and x <= 3
        let mut c1 = BTreeMap::new();
        c1.insert(Sym::PVar(0), -Rat::from_integer(BigInt::from(1)));
        s.assert_constraint(
            &Constraint::Atom(Atom::new(c1, Rel::Le, -Rat::from_integer(BigInt::from(3)))),
            &d,
        )
        .unwrap();
        let mut c2 = BTreeMap::new();
        c2.insert(Sym::PVar(0), Rat::from_integer(BigInt::from(1)));
        s.assert_constraint(
            &Constraint::Atom(Atom::new(c2, Rel::Le, Rat::from_integer(BigInt::from(3)))),
            &d,
        )
        .unwrap();
        assert_eq!(s.check_sat().unwrap(), SatResult::Sat);
        let model = s.get_model().unwrap();
        assert_eq!(model_value(&model, "x"), Rat::from_integer(BigInt::from(3)));
    }

    #[test]
    fn push_pop_scopes_declarations() {
        let d = decls_x();
        let mut s = Session::new(&SolverConfig::default()).unwrap();
        s.push().unwrap();
        let mut c = BTreeMap::new();
        c.insert(Sym::TVar(0), Rat::from_integer(BigInt::from(1)));
        s.assert_constraint(
            &Constraint::Atom(Atom::new(c.clone(), Rel::Lt, Rat::from_integer(BigInt::from(0)))),
            &d,
        )
        .unwrap();
        assert_eq!(s.check_sat().unwrap(), SatResult::Sat);
        s.pop().unwrap();
        // redeclaring after pop must work: the session forgot t0
        s.assert_constraint(
            &Constraint::Atom(Atom::new(c, Rel::Lt, Rat::from_integer(BigInt::from(0)))),
            &d,
        )
        .unwrap();
        assert_eq!(s.check_sat().unwrap(), SatResult::Sat);
    }

    #[test]
    fn unsat_has_no_model() {
        let d = decls_x();
        let mut s = Session::new(&SolverConfig::default()).unwrap();
        let mut c = BTreeMap::new();
        c.insert(Sym::PVar(0), Rat::from_integer(BigInt::from(1)));
        s.assert_constraint(
            &Constraint::Atom(Atom::new(c, Rel::Lt, Rat::from_integer(BigInt::from(0)))),
            &d,
        )
        .unwrap();
        assert_eq!(s.check_sat().unwrap(), SatResult::Unsat);
    }

    #[test]
    fn model_value_decoding() {
        let mut r = Reader::new();
        r.push_line("(- (/ 9 80000000))");
        let s = r.next_sexp().unwrap().unwrap();
        assert_eq!(
            value_to_rat(&s).unwrap(),
            Rat::new(BigInt::from(-9), BigInt::from(80000000))
        );
    }
}
