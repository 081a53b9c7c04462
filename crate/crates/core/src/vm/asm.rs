//! Line-oriented textual assembly for contract programs.
//!
//! One instruction per line, `label:` lines mark jump targets, `#` or `;`
//! start a comment. Methods are delimited by `method NAME` / `end`; the
//! constructor is the method named `init`.
//!
//! ```text
//! method setX1
//!   loadl 0
//!   sstore 0
//!   ret
//! end
//! ```

use std::collections::BTreeMap;

use super::{Instr, Program};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AsmError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown label {label}")]
    UnknownLabel { line: usize, label: String },
    #[error("duplicate method {0}")]
    DuplicateMethod(String),
}

fn err(line: usize, msg: impl Into<String>) -> AsmError {
    AsmError::Parse { line, msg: msg.into() }
}

/// Parses a whole program from assembly text.
pub fn parse_program(src: &str) -> Result<Program, AsmError> {
    let mut methods = BTreeMap::new();
    let mut current: Option<(String, Vec<(usize, String)>)> = None;
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix("method ") {
            if current.is_some() {
                return Err(err(line_no, "method block not closed before next method"));
            }
            current = Some((name.trim().to_string(), Vec::new()));
        } else if line == "end" {
            let (name, body) = current
                .take()
                .ok_or_else(|| err(line_no, "end outside of method block"))?;
            let instrs = assemble_body(&body)?;
            if methods.insert(name.clone(), instrs).is_some() {
                return Err(AsmError::DuplicateMethod(name));
            }
        } else {
            match &mut current {
                Some((_, body)) => body.push((line_no, line.to_string())),
                None => return Err(err(line_no, "instruction outside of method block")),
            }
        }
    }
    if current.is_some() {
        return Err(err(src.lines().count(), "unterminated method block"));
    }
    Ok(Program { methods })
}

fn assemble_body(lines: &[(usize, String)]) -> Result<Vec<Instr>, AsmError> {
    // first pass: label -> instruction index
    let mut labels: BTreeMap<String, usize> = BTreeMap::new();
    let mut pc = 0usize;
    for (line_no, line) in lines {
        if let Some(label) = line.strip_suffix(':') {
            if labels.insert(label.trim().to_string(), pc).is_some() {
                return Err(err(*line_no, format!("duplicate label {label}")));
            }
        } else {
            pc += 1;
        }
    }
    let mut out = Vec::with_capacity(pc);
    for (line_no, line) in lines {
        if line.ends_with(':') {
            continue;
        }
        out.push(parse_instr(*line_no, line, &labels)?);
    }
    Ok(out)
}

fn parse_instr(line: usize, text: &str, labels: &BTreeMap<String, usize>) -> Result<Instr, AsmError> {
    let mut parts = text.split_whitespace();
    let op = parts.next().unwrap_or("");
    let rest: Vec<&str> = parts.collect();
    let num = |s: &str| -> Result<u64, AsmError> {
        if let Some(hex) = s.strip_prefix("0x") {
            u64::from_str_radix(hex, 16).map_err(|e| err(line, format!("bad hex literal {s}: {e}")))
        } else {
            s.parse().map_err(|e| err(line, format!("bad literal {s}: {e}")))
        }
    };
    let slot = |s: &str| -> Result<u16, AsmError> {
        s.parse().map_err(|e| err(line, format!("bad slot {s}: {e}")))
    };
    let label = |s: &str| -> Result<usize, AsmError> {
        labels
            .get(s)
            .copied()
            .ok_or(AsmError::UnknownLabel { line, label: s.to_string() })
    };
    let arg = |i: usize| -> Result<&str, AsmError> {
        rest.get(i).copied().ok_or_else(|| err(line, format!("{op}: missing operand {i}")))
    };
    let instr = match op {
        "push" => Instr::Push(num(arg(0)?)?),
        "pop" => Instr::Pop,
        "dup" => Instr::Dup,
        "loadl" => Instr::LoadLocal(slot(arg(0)?)?),
        "storel" => Instr::StoreLocal(slot(arg(0)?)?),
        "sload" => Instr::SLoad(rest.first().map(|s| num(s)).transpose()?),
        "sstore" => Instr::SStore(rest.first().map(|s| num(s)).transpose()?),
        "add" => Instr::Add,
        "sub" => Instr::Sub,
        "mul" => Instr::Mul,
        "div" => Instr::Div,
        "lt" => Instr::Lt,
        "eq" => Instr::Eq,
        "jmp" => Instr::Jmp(label(arg(0)?)?),
        "jz" => Instr::Jz(label(arg(0)?)?),
        "call" | "callcode" => {
            let method = arg(0)?.to_string();
            let argc = num(arg(1)?)? as u8;
            let with_value = match rest.get(2) {
                None => false,
                Some(&"value") => true,
                Some(other) => return Err(err(line, format!("{op}: unexpected {other}"))),
            };
            if op == "call" {
                Instr::Call { method, argc, with_value }
            } else {
                Instr::CallCode { method, argc, with_value }
            }
        }
        "balance" => Instr::Balance,
        "transfer" => Instr::Transfer,
        "create" => Instr::Create { code: arg(0)?.to_string() },
        "selfdestruct" => Instr::SelfDestruct,
        "enter_mpc" => Instr::EnterMpc {
            cid_slot: slot(arg(0)?)?,
            params_slot: slot(arg(1)?)?,
            result_slot: slot(arg(2)?)?,
        },
        "ret" => match rest.first() {
            None => Instr::Return { with_value: false },
            Some(&"value") => Instr::Return { with_value: true },
            Some(other) => return Err(err(line, format!("ret: unexpected {other}"))),
        },
        "revert" => Instr::Revert,
        "timestamp" => Instr::Timestamp,
        "caller" => Instr::Caller,
        "origin" => Instr::Origin,
        "callvalue" => Instr::CallValue,
        "newlist" => Instr::NewList,
        "lpush" => Instr::ListPush,
        "lget" => Instr::ListGet,
        "llen" => Instr::ListLen,
        other => return Err(err(line, format!("unknown instruction {other}"))),
    };
    Ok(instr)
}
