//! Reader and writer for the OpenQASM 2 subset routed by this crate.
//!
//! Accepted statements: `OPENQASM 2.x`, `include`, `qreg`, `creg`, `gate`/`opaque`
//! declarations (skipped, the name becomes an opaque gate), `barrier` and `measure` (both
//! ignored for routing) and gate applications with up to two operands. `ccx` and `cswap`
//! are the only accepted three-operand gates. Whole-register arguments broadcast.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{CircuitDag, CircuitError, Gate, Qudit};

#[derive(Debug, Error, PartialEq)]
pub enum QasmError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unsupported statement `{statement}`")]
    Unsupported { line: usize, statement: String },
    #[error("line {line}: index {index} out of bounds for register `{register}` of size {size}")]
    OutOfBounds {
        line: usize,
        register: String,
        index: usize,
        size: usize,
    },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

const THREE_QUDIT_GATES: [&str; 2] = ["ccx", "cswap"];

struct Statement {
    line: usize,
    text: String,
}

/// Split source into statements, dropping comments. `gate { ... }` bodies end a statement at
/// the closing brace.
fn statements(source: &str) -> Result<Vec<Statement>, QasmError> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start_line = 1;
    let mut brace_depth = 0usize;
    let mut started = false;
    for (line_index, raw_line) in source.lines().enumerate() {
        let line_no = line_index + 1;
        let line = match raw_line.find("//") {
            Some(cut) => &raw_line[..cut],
            None => raw_line,
        };
        for ch in line.chars() {
            if !started && !ch.is_whitespace() {
                started = true;
                start_line = line_no;
            }
            match ch {
                '{' => {
                    brace_depth += 1;
                    current.push(ch);
                }
                '}' => {
                    if brace_depth == 0 {
                        return Err(QasmError::Syntax {
                            line: line_no,
                            message: "unmatched `}`".into(),
                        });
                    }
                    brace_depth -= 1;
                    current.push(ch);
                    if brace_depth == 0 {
                        out.push(Statement {
                            line: start_line,
                            text: std::mem::take(&mut current),
                        });
                        started = false;
                    }
                }
                ';' if brace_depth == 0 => {
                    out.push(Statement {
                        line: start_line,
                        text: std::mem::take(&mut current),
                    });
                    started = false;
                }
                _ => current.push(ch),
            }
        }
        current.push('\n');
    }
    if brace_depth > 0 {
        return Err(QasmError::Syntax {
            line: start_line,
            message: "unterminated `{` block".into(),
        });
    }
    if !current.trim().is_empty() {
        return Err(QasmError::Syntax {
            line: start_line,
            message: "missing `;`".into(),
        });
    }
    Ok(out)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Split `s` at commas that are not nested inside parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

#[derive(Clone, Copy)]
struct Register {
    offset: usize,
    size: usize,
}

enum Argument {
    Single(Qudit),
    Whole { offset: usize, size: usize },
}

struct Parser {
    qregs: HashMap<String, Register>,
    num_qudits: usize,
    gates: Vec<Gate>,
}

impl Parser {
    fn syntax(line: usize, message: impl Into<String>) -> QasmError {
        QasmError::Syntax {
            line,
            message: message.into(),
        }
    }

    fn parse_register_decl(line: usize, rest: &str) -> Result<(String, usize), QasmError> {
        let rest = rest.trim();
        let open = rest
            .find('[')
            .ok_or_else(|| Self::syntax(line, "expected `name[size]`"))?;
        let close = rest
            .rfind(']')
            .filter(|&c| c > open && rest[c + 1..].trim().is_empty())
            .ok_or_else(|| Self::syntax(line, "expected `]`"))?;
        let name = rest[..open].trim();
        if !is_ident(name) {
            return Err(Self::syntax(line, format!("invalid register name `{name}`")));
        }
        let size = rest[open + 1..close]
            .trim()
            .parse::<usize>()
            .map_err(|_| Self::syntax(line, "register size must be a non-negative integer"))?;
        Ok((name.to_string(), size))
    }

    fn parse_argument(&self, line: usize, arg: &str) -> Result<Argument, QasmError> {
        let arg = arg.trim();
        if let Some(open) = arg.find('[') {
            let name = arg[..open].trim();
            let close = arg
                .rfind(']')
                .filter(|&c| c > open && arg[c + 1..].trim().is_empty())
                .ok_or_else(|| Self::syntax(line, format!("malformed argument `{arg}`")))?;
            let reg = self
                .qregs
                .get(name)
                .ok_or_else(|| Self::syntax(line, format!("unknown register `{name}`")))?;
            let index = arg[open + 1..close]
                .trim()
                .parse::<usize>()
                .map_err(|_| Self::syntax(line, format!("malformed index in `{arg}`")))?;
            if index >= reg.size {
                return Err(QasmError::OutOfBounds {
                    line,
                    register: name.to_string(),
                    index,
                    size: reg.size,
                });
            }
            Ok(Argument::Single(reg.offset + index))
        } else {
            let reg = self
                .qregs
                .get(arg)
                .ok_or_else(|| Self::syntax(line, format!("unknown register `{arg}`")))?;
            Ok(Argument::Whole {
                offset: reg.offset,
                size: reg.size,
            })
        }
    }

    fn statement(&mut self, stmt: &Statement) -> Result<(), QasmError> {
        let text = stmt.text.trim();
        let line = stmt.line;
        if text.is_empty() {
            return Ok(());
        }
        let keyword_end = text
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(text.len());
        let keyword = &text[..keyword_end];
        let rest = &text[keyword_end..];
        match keyword {
            "OPENQASM" => {
                let version = rest.trim();
                if version == "2" || version.starts_with("2.") {
                    Ok(())
                } else {
                    Err(QasmError::Unsupported {
                        line,
                        statement: text.to_string(),
                    })
                }
            }
            "include" | "barrier" | "measure" | "creg" | "gate" | "opaque" => {
                if keyword == "creg" {
                    Self::parse_register_decl(line, rest)?;
                }
                Ok(())
            }
            "qreg" => {
                let (name, size) = Self::parse_register_decl(line, rest)?;
                if self.qregs.contains_key(&name) {
                    return Err(Self::syntax(line, format!("register `{name}` redeclared")));
                }
                self.qregs.insert(
                    name,
                    Register {
                        offset: self.num_qudits,
                        size,
                    },
                );
                self.num_qudits += size;
                Ok(())
            }
            "reset" | "if" | "def" | "input" | "output" | "qubit" | "bit" => {
                Err(QasmError::Unsupported {
                    line,
                    statement: text.to_string(),
                })
            }
            _ if is_ident(keyword) => self.gate_application(line, keyword, rest),
            _ => Err(Self::syntax(line, format!("unexpected `{text}`"))),
        }
    }

    fn gate_application(&mut self, line: usize, name: &str, rest: &str) -> Result<(), QasmError> {
        let rest = rest.trim_start();
        let (params, args) = if let Some(inner) = rest.strip_prefix('(') {
            let mut depth = 1;
            let mut close = None;
            for (i, ch) in inner.char_indices() {
                match ch {
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth == 0 {
                            close = Some(i);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            let close = close.ok_or_else(|| Self::syntax(line, "unbalanced parentheses"))?;
            let params = if inner[..close].trim().is_empty() {
                Vec::new()
            } else {
                split_top_level(&inner[..close])
                    .into_iter()
                    .map(|p| {
                        expr::evaluate(p).map_err(|m| Self::syntax(line, m)).and_then(|v| {
                            if v.is_finite() {
                                Ok(v)
                            } else {
                                Err(Self::syntax(line, format!("non-finite parameter `{}`", p.trim())))
                            }
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?
            };
            (params, &inner[close + 1..])
        } else {
            (Vec::new(), rest)
        };
        if args.trim().is_empty() {
            return Err(Self::syntax(line, format!("gate `{name}` has no arguments")));
        }
        let args = split_top_level(args)
            .into_iter()
            .map(|a| self.parse_argument(line, a))
            .collect::<Result<Vec<_>, _>>()?;
        if args.len() > 2 && !THREE_QUDIT_GATES.contains(&name) {
            return Err(QasmError::Unsupported {
                line,
                statement: format!("{name} with {} operands", args.len()),
            });
        }
        if args.len() > 3 {
            return Err(QasmError::Unsupported {
                line,
                statement: format!("{name} with {} operands", args.len()),
            });
        }
        let mut width = None;
        for arg in &args {
            if let Argument::Whole { size, .. } = arg {
                match width {
                    None => width = Some(*size),
                    Some(w) if w != *size => {
                        return Err(Self::syntax(line, "broadcast registers differ in size"))
                    }
                    _ => {}
                }
            }
        }
        for k in 0..width.unwrap_or(1) {
            let operands: Vec<Qudit> = args
                .iter()
                .map(|a| match *a {
                    Argument::Single(q) => q,
                    Argument::Whole { offset, .. } => offset + k,
                })
                .collect();
            for (i, q) in operands.iter().enumerate() {
                if operands[..i].contains(q) {
                    return Err(Self::syntax(line, format!("gate `{name}` repeats an operand")));
                }
            }
            self.gates.push(Gate {
                id: self.gates.len(),
                kind: name.to_string(),
                operands,
                params: params.clone(),
            });
        }
        Ok(())
    }
}

/// Parse OpenQASM 2 source into a [`CircuitDag`].
pub fn parse_qasm(source: &str) -> Result<CircuitDag, QasmError> {
    let mut parser = Parser {
        qregs: HashMap::new(),
        num_qudits: 0,
        gates: Vec::new(),
    };
    for stmt in statements(source)? {
        parser.statement(&stmt)?;
    }
    Ok(CircuitDag::from_gates(parser.num_qudits, parser.gates)?)
}

/// Serialize a circuit with a single register `q`. Parsing the output yields an equal DAG.
pub fn to_qasm(dag: &CircuitDag) -> String {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    if dag.num_qudits() > 0 {
        let _ = writeln!(out, "qreg q[{}];", dag.num_qudits());
    }
    for gate in dag.gates() {
        out.push_str(&gate.kind);
        if !gate.params.is_empty() {
            out.push('(');
            for (i, p) in gate.params.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{p:?}");
            }
            out.push(')');
        }
        out.push(' ');
        for (i, q) in gate.operands.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "q[{q}]");
        }
        out.push_str(";\n");
    }
    out
}

mod expr {
    //! Recursive-descent evaluator for gate parameter expressions.

    #[derive(Clone, Debug, PartialEq)]
    enum Token {
        Num(f64),
        Ident(String),
        Op(char),
    }

    fn tokenize(src: &str) -> Result<Vec<Token>, String> {
        let chars: Vec<char> = src.chars().collect();
        let mut tokens = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value = text
                    .parse::<f64>()
                    .map_err(|_| format!("malformed number `{text}`"))?;
                tokens.push(Token::Num(value));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                tokens.push(Token::Ident(chars[start..i].iter().collect()));
            } else if "+-*/^()".contains(c) {
                tokens.push(Token::Op(c));
                i += 1;
            } else {
                return Err(format!("unexpected character `{c}` in expression"));
            }
        }
        Ok(tokens)
    }

    struct Cursor {
        tokens: Vec<Token>,
        pos: usize,
    }

    impl Cursor {
        fn peek(&self) -> Option<&Token> {
            self.tokens.get(self.pos)
        }

        fn eat(&mut self, op: char) -> bool {
            if self.peek() == Some(&Token::Op(op)) {
                self.pos += 1;
                true
            } else {
                false
            }
        }

        fn sum(&mut self) -> Result<f64, String> {
            let mut value = self.product()?;
            loop {
                if self.eat('+') {
                    value += self.product()?;
                } else if self.eat('-') {
                    value -= self.product()?;
                } else {
                    return Ok(value);
                }
            }
        }

        fn product(&mut self) -> Result<f64, String> {
            let mut value = self.unary()?;
            loop {
                if self.eat('*') {
                    value *= self.unary()?;
                } else if self.eat('/') {
                    value /= self.unary()?;
                } else {
                    return Ok(value);
                }
            }
        }

        fn unary(&mut self) -> Result<f64, String> {
            if self.eat('-') {
                Ok(-self.unary()?)
            } else if self.eat('+') {
                self.unary()
            } else {
                self.power()
            }
        }

        fn power(&mut self) -> Result<f64, String> {
            let base = self.atom()?;
            if self.eat('^') {
                Ok(base.powf(self.unary()?))
            } else {
                Ok(base)
            }
        }

        fn atom(&mut self) -> Result<f64, String> {
            match self.tokens.get(self.pos).cloned() {
                Some(Token::Num(v)) => {
                    self.pos += 1;
                    Ok(v)
                }
                Some(Token::Ident(name)) => {
                    self.pos += 1;
                    if name == "pi" {
                        return Ok(std::f64::consts::PI);
                    }
                    let f: fn(f64) -> f64 = match name.as_str() {
                        "sin" => f64::sin,
                        "cos" => f64::cos,
                        "tan" => f64::tan,
                        "exp" => f64::exp,
                        "ln" => f64::ln,
                        "sqrt" => f64::sqrt,
                        _ => return Err(format!("unknown identifier `{name}`")),
                    };
                    if !self.eat('(') {
                        return Err(format!("expected `(` after `{name}`"));
                    }
                    let arg = self.sum()?;
                    if !self.eat(')') {
                        return Err("expected `)`".into());
                    }
                    Ok(f(arg))
                }
                Some(Token::Op('(')) => {
                    self.pos += 1;
                    let v = self.sum()?;
                    if !self.eat(')') {
                        return Err("expected `)`".into());
                    }
                    Ok(v)
                }
                Some(t) => Err(format!("unexpected token {t:?}")),
                None => Err("unexpected end of expression".into()),
            }
        }
    }

    pub fn evaluate(src: &str) -> Result<f64, String> {
        let mut cursor = Cursor {
            tokens: tokenize(src)?,
            pos: 0,
        };
        let value = cursor.sum()?;
        if cursor.pos != cursor.tokens.len() {
            return Err(format!("trailing input in expression `{}`", src.trim()));
        }
        Ok(value)
    }

    #[cfg(test)]
    mod tests {
        use super::evaluate;
        use std::f64::consts::PI;

        #[test]
        fn arithmetic() {
            assert_eq!(evaluate("pi/2").unwrap(), PI / 2.0);
            assert_eq!(evaluate("-pi/4").unwrap(), -PI / 4.0);
            assert_eq!(evaluate("2*(1+3)^2").unwrap(), 32.0);
            assert_eq!(evaluate("1.5e-3").unwrap(), 1.5e-3);
            assert_eq!(evaluate("cos(0)").unwrap(), 1.0);
            assert!(evaluate("foo").is_err());
            assert!(evaluate("1 2").is_err());
        }
    }
}
