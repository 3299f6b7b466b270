use super::lexer::{tokenize, Tok, Token};
use super::{pi_fraction, ParseError, QasmDocument, Register, Statement, MAX_REGISTER_BITS};
use crate::circuit::{GateInstance, GateKind};

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    registers: Vec<Register>,
    num_qubits: usize,
    num_clbits: usize,
    statements: Vec<Statement>,
}

/// Register operand: a whole register or one bit of it.
struct Operand {
    reg: usize,
    index: Option<usize>,
    at: Token,
}

/// Catalog kind and qubit count of a gate name.
fn resolve_alias(name: &str) -> Option<(GateKind, usize)> {
    let kind = match name {
        "CX" | "cnot" => GateKind::Cx,
        "cp" | "cphase" => GateKind::Cu1,
        // phase gates differ from rz only by a global phase
        "u1" | "p" => GateKind::Rz,
        "toffoli" => GateKind::Ccx,
        "c3x" => return Some((GateKind::Mcx, 4)),
        "c4x" => return Some((GateKind::Mcx, 5)),
        _ => GateKind::from_name(name).filter(|k| !matches!(k, GateKind::Measure | GateKind::Barrier | GateKind::Mcx))?,
    };
    Some((kind, kind.arity()?))
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn next(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err(t: &Token, msg: impl Into<String>) -> ParseError {
        ParseError::new(t.line, t.column, msg, &t.tok.text())
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ParseError> {
        let t = self.next();
        if t.tok == want {
            Ok(t)
        } else {
            Err(Self::err(&t, format!("expected {what}")))
        }
    }

    fn expect_int(&mut self) -> Result<(usize, Token), ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Int(s) => match s.parse::<usize>() {
                Ok(v) => Ok((v, t)),
                Err(_) => Err(Self::err(&t, "integer too large")),
            },
            _ => Err(Self::err(&t, "expected integer")),
        }
    }

    fn parse(&mut self) -> Result<String, ParseError> {
        let mut version = "2.0".to_string();
        if matches!(&self.peek().tok, Tok::Ident(s) if s == "OPENQASM") {
            self.next();
            let t = self.next();
            match &t.tok {
                Tok::Real(v) | Tok::Int(v) if v == "2.0" || v == "2" => version = "2.0".into(),
                Tok::Real(_) | Tok::Int(_) => return Err(Self::err(&t, "only OPENQASM 2.0 is supported")),
                _ => return Err(Self::err(&t, "expected version number")),
            }
            self.expect(Tok::Semi, "`;`")?;
        }
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Eof => break,
                Tok::Ident(word) => match word.as_str() {
                    "include" => {
                        self.next();
                        let s = self.next();
                        if !matches!(s.tok, Tok::Str(_)) {
                            return Err(Self::err(&s, "expected file name string"));
                        }
                        self.expect(Tok::Semi, "`;`")?;
                    }
                    "qreg" | "creg" => self.declaration(word == "qreg")?,
                    "gate" | "opaque" => return Err(Self::err(&t, "gate definitions are not supported")),
                    "if" | "reset" | "OPENQASM" => {
                        return Err(Self::err(&t, format!("`{word}` is not supported")));
                    }
                    "measure" => self.measure()?,
                    "barrier" => self.barrier()?,
                    _ => self.application()?,
                },
                _ => return Err(Self::err(&t, "expected statement")),
            }
        }
        Ok(version)
    }

    fn declaration(&mut self, quantum: bool) -> Result<(), ParseError> {
        self.next();
        let name_tok = self.next();
        let Tok::Ident(name) = &name_tok.tok else {
            return Err(Self::err(&name_tok, "expected register name"));
        };
        if self.registers.iter().any(|r| &r.name == name) {
            return Err(Self::err(&name_tok, format!("register `{name}` already declared")));
        }
        self.expect(Tok::LBracket, "`[`")?;
        let (size, size_tok) = self.expect_int()?;
        self.expect(Tok::RBracket, "`]`")?;
        self.expect(Tok::Semi, "`;`")?;
        if size == 0 {
            return Err(Self::err(&size_tok, "register size must be positive"));
        }
        let total = if quantum { &mut self.num_qubits } else { &mut self.num_clbits };
        if *total + size > MAX_REGISTER_BITS {
            return Err(Self::err(
                &size_tok,
                format!("more than {MAX_REGISTER_BITS} bits declared"),
            ));
        }
        let offset = *total;
        *total += size;
        self.registers.push(Register {
            name: name.clone(),
            size,
            offset,
            quantum,
        });
        Ok(())
    }

    fn operand(&mut self, quantum: bool) -> Result<Operand, ParseError> {
        let at = self.next();
        let Tok::Ident(name) = &at.tok else {
            return Err(Self::err(&at, "expected register operand"));
        };
        let Some(reg) = self.registers.iter().position(|r| &r.name == name) else {
            return Err(Self::err(&at, format!("undeclared register `{name}`")));
        };
        if self.registers[reg].quantum != quantum {
            let want = if quantum { "quantum" } else { "classical" };
            return Err(Self::err(&at, format!("`{name}` is not a {want} register")));
        }
        let mut index = None;
        if self.peek().tok == Tok::LBracket {
            self.next();
            let (i, itok) = self.expect_int()?;
            self.expect(Tok::RBracket, "`]`")?;
            if i >= self.registers[reg].size {
                return Err(Self::err(
                    &itok,
                    format!("index {i} out of range for `{name}[{}]`", self.registers[reg].size),
                ));
            }
            index = Some(i);
        }
        Ok(Operand { reg, index, at })
    }

    fn operand_list(&mut self) -> Result<Vec<Operand>, ParseError> {
        let mut ops = vec![self.operand(true)?];
        while self.peek().tok == Tok::Comma {
            self.next();
            ops.push(self.operand(true)?);
        }
        Ok(ops)
    }

    /// Expands whole-register operands; all whole registers must agree in size.
    fn broadcast(&self, ops: &[Operand]) -> Result<Vec<Vec<usize>>, ParseError> {
        let mut width: Option<usize> = None;
        for op in ops.iter().filter(|o| o.index.is_none()) {
            let size = self.registers[op.reg].size;
            match width {
                Some(w) if w != size => return Err(Self::err(&op.at, "register sizes differ in broadcast")),
                _ => width = Some(size),
            }
        }
        let rows = width.unwrap_or(1);
        Ok((0..rows)
            .map(|k| {
                ops.iter()
                    .map(|op| self.registers[op.reg].offset + op.index.unwrap_or(k))
                    .collect()
            })
            .collect())
    }

    fn push(&mut self, kind: GateKind, qubits: Vec<usize>, clbits: Vec<usize>, params: Vec<f64>, at: &Token) {
        let id = self.statements.len();
        self.statements.push(Statement {
            gate: GateInstance {
                id,
                kind,
                qubits,
                clbits,
                params,
            },
            line: at.line,
            column: at.column,
        });
    }

    fn measure(&mut self) -> Result<(), ParseError> {
        let at = self.next();
        let q = self.operand(true)?;
        self.expect(Tok::Arrow, "`->`")?;
        let c = self.operand(false)?;
        self.expect(Tok::Semi, "`;`")?;
        let (qsize, csize) = (self.registers[q.reg].size, self.registers[c.reg].size);
        let pairs: Vec<(usize, usize)> = match (q.index, c.index) {
            (Some(i), Some(j)) => vec![(i, j)],
            (None, None) if qsize == csize => (0..qsize).map(|k| (k, k)).collect(),
            _ => return Err(Self::err(&at, "measure operands must both be bits or equal-size registers")),
        };
        let (qo, co) = (self.registers[q.reg].offset, self.registers[c.reg].offset);
        for (i, j) in pairs {
            self.push(GateKind::Measure, vec![qo + i], vec![co + j], vec![], &at);
        }
        Ok(())
    }

    fn barrier(&mut self) -> Result<(), ParseError> {
        let at = self.next();
        let ops = self.operand_list()?;
        self.expect(Tok::Semi, "`;`")?;
        let mut qubits = Vec::new();
        for op in &ops {
            let r = &self.registers[op.reg];
            match op.index {
                Some(i) => qubits.push(r.offset + i),
                None => qubits.extend(r.offset..r.offset + r.size),
            }
        }
        let mut seen = std::collections::HashSet::new();
        if !qubits.iter().all(|q| seen.insert(*q)) {
            return Err(Self::err(&at, "duplicate qubit in barrier"));
        }
        self.push(GateKind::Barrier, qubits, vec![], vec![], &at);
        Ok(())
    }

    fn application(&mut self) -> Result<(), ParseError> {
        let at = self.next();
        let Tok::Ident(name) = &at.tok else {
            return Err(Self::err(&at, "expected gate name"));
        };
        let Some((kind, arity)) = resolve_alias(name) else {
            return Err(Self::err(&at, format!("unknown gate `{name}`")));
        };
        let mut params = Vec::new();
        if self.peek().tok == Tok::LParen {
            self.next();
            if self.peek().tok != Tok::RParen {
                params.push(self.expression()?);
                while self.peek().tok == Tok::Comma {
                    self.next();
                    params.push(self.expression()?);
                }
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        if params.len() != kind.param_count() {
            return Err(Self::err(
                &at,
                format!("`{name}` takes {} parameter(s), got {}", kind.param_count(), params.len()),
            ));
        }
        let ops = self.operand_list()?;
        self.expect(Tok::Semi, "`;`")?;
        if ops.len() != arity {
            return Err(Self::err(
                &at,
                format!("`{name}` takes {arity} qubit(s), got {}", ops.len()),
            ));
        }
        for qubits in self.broadcast(&ops)? {
            let mut seen = std::collections::HashSet::new();
            if !qubits.iter().all(|q| seen.insert(*q)) {
                return Err(Self::err(&at, "duplicate qubit operands"));
            }
            self.push(kind, qubits, vec![], params.clone(), &at);
        }
        Ok(())
    }

    /// `[-] decimal` or `[-] [k *] pi [/ d]`.
    fn expression(&mut self) -> Result<f64, ParseError> {
        let start = self.peek().clone();
        let mut negative = false;
        if matches!(self.peek().tok, Tok::Minus | Tok::Plus) {
            negative = self.next().tok == Tok::Minus;
        }
        let t = self.next();
        let malformed = |t: &Token| Self::err(t, "malformed expression; expected decimal or k*pi/d");
        let value = match &t.tok {
            Tok::Pi => self.pi_tail(1, negative)?,
            Tok::Int(s) if self.peek().tok == Tok::Star => {
                self.next();
                let p = self.next();
                if p.tok != Tok::Pi {
                    return Err(malformed(&p));
                }
                let k: i64 = s.parse().map_err(|_| Self::err(&t, "integer too large"))?;
                self.pi_tail(k, negative)?
            }
            Tok::Int(s) | Tok::Real(s) => {
                let v: f64 = s.parse().map_err(|_| malformed(&t))?;
                if negative {
                    -v
                } else {
                    v
                }
            }
            _ => return Err(malformed(&t)),
        };
        if !value.is_finite() {
            return Err(Self::err(&start, "parameter is not finite"));
        }
        Ok(value)
    }

    fn pi_tail(&mut self, k: i64, negative: bool) -> Result<f64, ParseError> {
        let mut d = 1u64;
        if self.peek().tok == Tok::Slash {
            self.next();
            let (v, vt) = self.expect_int()?;
            if v == 0 {
                return Err(Self::err(&vt, "division by zero"));
            }
            d = u64::try_from(v).map_err(|_| Self::err(&vt, "integer too large"))?;
        }
        let k = if negative { -k } else { k };
        Ok(pi_fraction(k, d))
    }
}

pub(crate) fn parse_document(text: &str) -> Result<QasmDocument, ParseError> {
    let toks = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        registers: Vec::new(),
        num_qubits: 0,
        num_clbits: 0,
        statements: Vec::new(),
    };
    let version = p.parse()?;
    Ok(QasmDocument {
        version,
        registers: p.registers,
        num_qubits: p.num_qubits,
        num_clbits: p.num_clbits,
        statements: p.statements,
    })
}
