//! OpenQASM 2.0 text export and a parser for the subset it emits.
//!
//! Ticks travel as `barrier q; // dt=<us>` and ideal pulses carry a
//! trailing `// pulse` comment, so export and re-import round-trip exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Circuit, Gate, GateKind, QubitRole, Tick};
use crate::error::{Error, Result};

pub fn export_qasm(c: &Circuit) -> String {
    let n = c.n_qubits();
    let mut s = String::new();
    s.push_str("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(s, "qreg q[{n}];");
    let _ = writeln!(s, "creg c[{n}];");
    for (q, role) in c.roles() {
        let _ = writeln!(s, "// role q[{q}] {}", role.name());
    }
    if c.global_phase() != 0.0 {
        let _ = writeln!(s, "// global_phase {}", c.global_phase());
    }
    let ticks = c.ticks();
    let mut ti = 0;
    let emit_ticks = |s: &mut String, ti: &mut usize, upto: usize| {
        while *ti < ticks.len() && ticks[*ti].after <= upto {
            let _ = writeln!(s, "barrier q; // dt={}", ticks[*ti].duration);
            *ti += 1;
        }
    };
    for (i, g) in c.gates().iter().enumerate() {
        emit_ticks(&mut s, &mut ti, i);
        if g.is_measurement() {
            let q = g.targets[0];
            let _ = writeln!(s, "measure q[{q}] -> c[{q}];");
            continue;
        }
        let _ = write!(s, "{g};");
        if g.ideal {
            s.push_str(" // pulse");
        }
        s.push('\n');
    }
    emit_ticks(&mut s, &mut ti, usize::MAX);
    s
}

fn qasm_err(line: usize, message: impl Into<String>) -> Error {
    Error::Qasm {
        line,
        message: message.into(),
    }
}

/// Parse `q[3]` into 3.
fn parse_qubit(tok: &str, reg: &str, line: usize) -> Result<usize> {
    let tok = tok.trim();
    let inner = tok
        .strip_prefix(reg)
        .and_then(|r| r.strip_prefix('['))
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| qasm_err(line, format!("expected {reg}[i], got `{tok}`")))?;
    inner
        .trim()
        .parse()
        .map_err(|_| qasm_err(line, format!("bad index in `{tok}`")))
}

/// Arithmetic over numbers and `pi` with `+ - * /` and parentheses.
struct Expr<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Expr<'a> {
    fn eval(text: &'a str) -> Option<f64> {
        let mut e = Expr {
            src: text.as_bytes(),
            pos: 0,
        };
        let v = e.sum()?;
        e.skip_ws();
        (e.pos == e.src.len()).then_some(v)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn sum(&mut self) -> Option<f64> {
        let mut v = self.product()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let r = self.product()?;
            v = if op == b'+' { v + r } else { v - r };
        }
        Some(v)
    }

    fn product(&mut self) -> Option<f64> {
        let mut v = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let r = self.unary()?;
            v = if op == b'*' { v * r } else { v / r };
        }
        Some(v)
    }

    fn unary(&mut self) -> Option<f64> {
        match self.peek()? {
            b'-' => {
                self.pos += 1;
                Some(-self.unary()?)
            }
            b'+' => {
                self.pos += 1;
                self.unary()
            }
            b'(' => {
                self.pos += 1;
                let v = self.sum()?;
                (self.peek()? == b')').then(|| self.pos += 1)?;
                Some(v)
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Option<f64> {
        let rest = &self.src[self.pos..];
        if rest.starts_with(b"pi") {
            self.pos += 2;
            return Some(std::f64::consts::PI);
        }
        let mut end = 0;
        while end < rest.len() {
            let ch = rest[end];
            let exp_sign = end > 0
                && (ch == b'-' || ch == b'+')
                && matches!(rest[end - 1], b'e' | b'E');
            if ch.is_ascii_digit() || ch == b'.' || ch == b'e' || ch == b'E' || exp_sign {
                end += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&rest[..end]).ok()?;
        let v = text.parse().ok()?;
        self.pos += end;
        Some(v)
    }
}

/// Split `name(args) rest` into name, optional parameter text, and operands.
fn split_statement(stmt: &str) -> (&str, Option<&str>, &str) {
    let name_end = stmt
        .find(|c: char| c == '(' || c.is_whitespace())
        .unwrap_or(stmt.len());
    let name = &stmt[..name_end];
    let rest = &stmt[name_end..];
    if let Some(r) = rest.strip_prefix('(') {
        let mut depth = 1;
        for (i, ch) in r.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        return (name, Some(&r[..i]), r[i + 1..].trim());
                    }
                }
                _ => {}
            }
        }
        (name, Some(r), "")
    } else {
        (name, None, rest.trim())
    }
}

pub fn parse_qasm(text: &str) -> Result<Circuit> {
    let mut n_qubits: Option<usize> = None;
    let mut saw_header = false;
    let mut roles = BTreeMap::new();
    let mut global_phase = 0.0;
    let mut gates: Vec<Gate> = Vec::new();
    let mut ticks = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix("//") {
            let comment = comment.trim();
            if let Some(r) = comment.strip_prefix("role ") {
                let (q, name) = r
                    .split_once(' ')
                    .ok_or_else(|| qasm_err(line, "role comment needs `q[i] name`"))?;
                let q = parse_qubit(q, "q", line)?;
                let role = QubitRole::parse(name.trim())
                    .ok_or_else(|| qasm_err(line, format!("unknown role `{}`", name.trim())))?;
                roles.insert(q, role);
            } else if let Some(r) = comment.strip_prefix("global_phase ") {
                global_phase = r
                    .trim()
                    .parse()
                    .map_err(|_| qasm_err(line, "bad global_phase value"))?;
            }
            continue;
        }
        let (stmt, comment) = match trimmed.split_once("//") {
            Some((s, c)) => (s.trim(), Some(c.trim())),
            None => (trimmed, None),
        };
        let stmt = stmt
            .strip_suffix(';')
            .ok_or_else(|| qasm_err(line, "missing `;`"))?
            .trim();

        if let Some(v) = stmt.strip_prefix("OPENQASM") {
            if v.trim() != "2.0" {
                return Err(qasm_err(line, format!("unsupported version `{}`", v.trim())));
            }
            saw_header = true;
            continue;
        }
        if !saw_header {
            return Err(qasm_err(line, "expected `OPENQASM 2.0;` header"));
        }
        if stmt.starts_with("include") {
            continue;
        }
        if let Some(r) = stmt.strip_prefix("qreg ") {
            if n_qubits.is_some() {
                return Err(qasm_err(line, "only one qreg is supported"));
            }
            n_qubits = Some(parse_qubit(r, "q", line)?);
            continue;
        }
        if stmt.starts_with("creg ") {
            continue;
        }
        let n = n_qubits.ok_or_else(|| qasm_err(line, "gate before qreg"))?;

        if stmt.starts_with("barrier") {
            let duration = comment
                .and_then(|c| c.strip_prefix("dt="))
                .map(|v| v.trim().parse::<f64>())
                .transpose()
                .map_err(|_| qasm_err(line, "bad dt value"))?;
            if let Some(duration) = duration {
                ticks.push(Tick {
                    after: gates.len(),
                    duration,
                });
            }
            continue;
        }

        let (name, params, operands) = split_statement(stmt);
        let kind = GateKind::from_qasm_name(name).map_err(|_| qasm_err(line, format!("unknown gate `{name}`")))?;
        let targets = if kind == GateKind::MeasureZ {
            let (q, c) = operands
                .split_once("->")
                .ok_or_else(|| qasm_err(line, "measure needs `q[i] -> c[i]`"))?;
            parse_qubit(c, "c", line)?;
            vec![parse_qubit(q, "q", line)?]
        } else {
            operands
                .split(',')
                .map(|t| parse_qubit(t, "q", line))
                .collect::<Result<Vec<_>>>()?
        };
        let params = match params {
            Some(p) => p
                .split(',')
                .map(|e| Expr::eval(e).ok_or_else(|| qasm_err(line, format!("bad angle `{}`", e.trim()))))
                .collect::<Result<Vec<_>>>()?,
            None => vec![],
        };
        for &t in &targets {
            if t >= n {
                return Err(qasm_err(line, format!("qubit {t} outside register of {n}")));
            }
        }
        let mut g = Gate::new(kind, targets, params).map_err(|e| qasm_err(line, e.to_string()))?;
        g.ideal = comment == Some("pulse");
        gates.push(g);
    }

    let n = n_qubits.ok_or_else(|| qasm_err(0, "no qreg declared"))?;
    let mut check = Circuit::new(n);
    for g in &gates {
        check.push(g.clone()).map_err(|e| qasm_err(0, e.to_string()))?;
    }
    Ok(Circuit::from_parts(n, gates, roles, ticks, global_phase))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expression_parser() {
        let pi = std::f64::consts::PI;
        assert_eq!(Expr::eval("pi/2"), Some(pi / 2.0));
        assert_eq!(Expr::eval("-pi"), Some(-pi));
        assert_eq!(Expr::eval("3*pi/4"), Some(3.0 * pi / 4.0));
        assert_eq!(Expr::eval("1.5e-3"), Some(1.5e-3));
        assert_eq!(Expr::eval("-2.5E+2"), Some(-250.0));
        assert_eq!(Expr::eval("(1+2)*3"), Some(9.0));
        assert_eq!(Expr::eval("2 pi"), None);
        assert_eq!(Expr::eval(""), None);
    }

    #[test]
    fn roundtrip_with_ticks_pulses_and_roles() {
        let mut c = Circuit::new(3);
        c.set_role(0, QubitRole::Electron).unwrap();
        c.set_role(2, QubitRole::Flux).unwrap();
        c.push(Gate::h(0)).unwrap();
        c.push(Gate::cnot(0, 2)).unwrap();
        c.tick(0.125);
        c.push(Gate::x(0).as_pulse()).unwrap();
        c.push(Gate::u3(1, 0.1, -0.2, 1.0 / 3.0)).unwrap();
        c.tick(0.1 + 0.2);
        c.set_global_phase(-1.25);
        c.push(Gate::measure(0)).unwrap();
        let text = export_qasm(&c);
        assert!(text.starts_with("OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[3];\ncreg c[3];\n"));
        assert!(text.contains("x q[0]; // pulse\n"));
        assert!(text.contains("measure q[0] -> c[0];\n"));
        let back = parse_qasm(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(export_qasm(&back), text);
    }

    #[test]
    fn accepts_pi_angles_and_plain_barriers() {
        let src = "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[2];\ncreg c[2];\nrx(pi/2) q[0];\nbarrier q;\ncx q[0], q[1];\n";
        let c = parse_qasm(src).unwrap();
        assert_eq!(c.gate_count(), 2);
        assert!(c.ticks().is_empty());
        assert_eq!(c.gates()[0].params[0], std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn rejects_malformed_input() {
        let head = "OPENQASM 2.0;\nqreg q[2];\n";
        for bad in [
            format!("{head}foo q[0];\n"),
            format!("{head}h q[5];\n"),
            format!("{head}h q[0]\n"),
            format!("{head}rz(abc) q[0];\n"),
            format!("{head}cx q[0];\n"),
            "qreg q[2];\nh q[0];\n".to_string(),
            "OPENQASM 3.0;\n".to_string(),
        ] {
            assert!(matches!(parse_qasm(&bad), Err(Error::Qasm { .. })), "{bad}");
        }
    }
}
