//! The contract virtual machine: a small stack-and-locals interpreter with
//! one extra capability over an ordinary chain VM — a transaction can
//! suspend itself at an MPC invocation and resume later with the result.
//!
//! Execution is organised around an [`ExecutionContext`] that accumulates
//! pending writes, the set of accessed contract addresses, gas and events.
//! Suspension snapshots the whole context; resumption restores it, writes
//! the MPC result into the designated local, and continues under the
//! restricted access regime (only the locked contract and the transaction
//! manager may be touched).

pub mod asm;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::types::{Address, TxHash};

/// A contract program: named methods over the shared instruction set.
/// `init` runs as the constructor on deployment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub methods: BTreeMap<String, Vec<Instr>>,
}

impl Program {
    pub fn method(&self, name: &str) -> Option<&[Instr]> {
        self.methods.get(name).map(|v| v.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Instr {
    Push(u64),
    Pop,
    Dup,
    LoadLocal(u16),
    StoreLocal(u16),
    /// Pops the storage key unless an immediate key is given.
    SLoad(Option<u64>),
    /// Pops the value, then the key unless an immediate key is given.
    SStore(Option<u64>),
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Eq,
    Jmp(usize),
    Jz(usize),
    /// Pops argc args (top of stack is the last arg), then the value if
    /// `with_value`, then the target address. Pushes the callee's return.
    Call { method: String, argc: u8, with_value: bool },
    /// Runs the target's bytecode in the caller's storage context. Value,
    /// when present, is paid to the code provider.
    CallCode { method: String, argc: u8, with_value: bool },
    /// Pops an address, pushes its balance.
    Balance,
    /// Pops the value, then the recipient address.
    Transfer,
    /// Deploys a named program from the code library; pops the endowment,
    /// pushes the fresh address.
    Create { code: String },
    /// Pops the refund address.
    SelfDestruct,
    /// Reads cid and the public-input list from locals, suspends, and on
    /// resumption stores the result list into `result_slot`.
    EnterMpc { cid_slot: u16, params_slot: u16, result_slot: u16 },
    Return { with_value: bool },
    Revert,
    Timestamp,
    Caller,
    Origin,
    CallValue,
    NewList,
    ListPush,
    ListGet,
    ListLen,
}

/// Runtime value: plain number or a list (public inputs, MPC results).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Value {
    Num(u64),
    List(Vec<u64>),
}

impl Value {
    fn as_num(&self) -> Result<u64, RevertReason> {
        match self {
            Value::Num(n) => Ok(*n),
            Value::List(_) => Err(RevertReason::TypeError),
        }
    }

    fn as_list(&self) -> Result<&[u64], RevertReason> {
        match self {
            Value::List(l) => Ok(l),
            Value::Num(_) => Err(RevertReason::TypeError),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub enum RevertReason {
    #[error("out of gas")]
    OutOfGas,
    #[error("stack underflow")]
    StackUnderflow,
    #[error("stack overflow")]
    StackOverflow,
    #[error("bad jump target {0}")]
    BadJump(usize),
    #[error("access violation: {0}")]
    AccessViolation(String),
    #[error("explicit revert")]
    ExplicitRevert,
    #[error("type error")]
    TypeError,
    #[error("arithmetic overflow")]
    ArithmeticOverflow,
    #[error("division by zero")]
    DivisionByZero,
    #[error("insufficient balance")]
    InsufficientBalance,
    #[error("unknown method {0}")]
    UnknownMethod(String),
    #[error("call depth exceeded")]
    CallDepthExceeded,
    #[error("list index {index} out of bounds (len {len})")]
    ListIndex { index: u64, len: u64 },
    #[error("unknown circuit {0}")]
    UnknownCircuit(u64),
    #[error("unknown code template {0}")]
    UnknownCode(String),
    #[error("mpc manager: {0}")]
    MpcManager(String),
}

const MAX_CALL_DEPTH: usize = 16;
const MAX_STACK: usize = 1024;

/// One activation record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub contract: Address,
    /// Storage owner; differs from `code_source` under borrowed-code calls.
    pub code_source: Address,
    pub method: String,
    pub pc: usize,
    pub locals: Vec<Value>,
    pub stack: Vec<Value>,
    pub caller: Address,
    pub call_value: u64,
}

/// Uncommitted changes to one account.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountDelta {
    /// Absolute post-transaction balance when touched.
    pub balance: Option<u64>,
    pub storage: BTreeMap<u64, u64>,
    pub deployed_code: Option<String>,
    pub destroyed: bool,
}

/// Ordered event log entry for receipts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VmEvent {
    pub kind: String,
    pub data: Vec<u64>,
}

/// Everything one transaction execution accumulates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionContext {
    pub tx_hash: TxHash,
    pub origin: Address,
    pub frames: Vec<Frame>,
    /// Contract addresses accessed so far (always contains the entry
    /// contract; the transaction manager is exempt).
    pub accessed: BTreeSet<Address>,
    pub writes: BTreeMap<Address, AccountDelta>,
    pub gas_used: u64,
    pub gas_limit: u64,
    pub events: Vec<VmEvent>,
    /// Number of MPC invocations so far in this transaction.
    pub mpc_invocations: u32,
    /// Set once resumed: all further access is restricted to this contract
    /// and the transaction manager.
    pub resumed_lock: Option<Address>,
}

/// Suspended execution context plus the bookkeeping the ledger keeps per
/// locked contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavedMpcState {
    pub result_slot: u16,
    pub cid: usize,
    pub params: Vec<u64>,
    pub context: ExecutionContext,
    pub locked_contract: Address,
    pub tx_hash: TxHash,
    pub sender: Address,
    pub invocation_count: u32,
}

impl SavedMpcState {
    /// Call value the suspended transaction still carries: debited from the
    /// sender at suspension, credited to the locked contract only when the
    /// pending writes commit.
    pub fn carried_value(&self) -> u64 {
        self.context.frames.first().map(|f| f.call_value).unwrap_or(0)
    }
}

/// Read-only view of the committed world the VM executes against.
pub struct VmEnv<'a> {
    pub balances: &'a dyn Fn(Address) -> u64,
    pub storage: &'a dyn Fn(Address, u64) -> u64,
    pub code: &'a dyn Fn(Address) -> Option<Arc<Program>>,
    pub code_library: &'a dyn Fn(&str) -> Option<Arc<Program>>,
    pub locked: &'a BTreeSet<Address>,
    pub height: u64,
    pub enter_mpc_gas: u64,
    /// Next nonce to use when deriving a fresh contract address.
    pub create_nonce: u64,
}

/// Terminal result of driving a context.
#[derive(Debug)]
pub enum ExecOutcome {
    Completed { ctx: ExecutionContext, ret: Option<Value> },
    Reverted { reason: RevertReason, gas_used: u64 },
    /// Hit `enter_mpc`; the ledger decides whether suspension is permitted.
    Suspended { ctx: ExecutionContext, result_slot: u16, cid: u64, params: Vec<u64> },
}

enum StepOutcome {
    Continue,
    Halted(Option<Value>),
    Suspend { result_slot: u16, cid: u64, params: Vec<u64> },
}

impl ExecutionContext {
    pub fn new(tx_hash: TxHash, origin: Address, gas_limit: u64) -> ExecutionContext {
        ExecutionContext {
            tx_hash,
            origin,
            frames: Vec::new(),
            accessed: BTreeSet::new(),
            writes: BTreeMap::new(),
            gas_used: 0,
            gas_limit,
            events: Vec::new(),
            mpc_invocations: 0,
            resumed_lock: None,
        }
    }

    fn delta(&mut self, addr: Address) -> &mut AccountDelta {
        self.writes.entry(addr).or_default()
    }

    pub fn read_balance(&self, env: &VmEnv, addr: Address) -> u64 {
        self.writes.get(&addr).and_then(|d| d.balance).unwrap_or_else(|| (env.balances)(addr))
    }

    fn read_storage(&self, env: &VmEnv, addr: Address, key: u64) -> u64 {
        self.writes
            .get(&addr)
            .and_then(|d| d.storage.get(&key).copied())
            .unwrap_or_else(|| (env.storage)(addr, key))
    }

    fn charge(&mut self, gas: u64) -> Result<(), RevertReason> {
        self.gas_used = self.gas_used.saturating_add(gas);
        if self.gas_used > self.gas_limit {
            return Err(RevertReason::OutOfGas);
        }
        Ok(())
    }

    /// The access matrix. `value_attached` covers transfers piggybacked on
    /// calls; denial always reverts the transaction, there is no waiting.
    fn access_check(
        &self,
        env: &VmEnv,
        what: &str,
        target: Address,
        value_attached: bool,
        code_only: bool,
    ) -> Result<(), RevertReason> {
        if target == Address::MPC_TX_MGR {
            return Ok(());
        }
        if let Some(lock) = self.resumed_lock {
            // Resumed executions may touch only their own locked contract.
            if target != lock {
                return Err(RevertReason::AccessViolation(format!(
                    "resumed execution of {lock} may not {what} {target}"
                )));
            }
            return Ok(());
        }
        if env.locked.contains(&target) {
            if code_only && !value_attached {
                // Borrowing a locked contract's bytecode reads immutable
                // code only and runs against the caller's storage.
                return Ok(());
            }
            return Err(RevertReason::AccessViolation(format!("{what} on locked contract {target}")));
        }
        Ok(())
    }

    fn push(frame: &mut Frame, v: Value) -> Result<(), RevertReason> {
        if frame.stack.len() >= MAX_STACK {
            return Err(RevertReason::StackOverflow);
        }
        frame.stack.push(v);
        Ok(())
    }

    fn pop(frame: &mut Frame) -> Result<Value, RevertReason> {
        frame.stack.pop().ok_or(RevertReason::StackUnderflow)
    }

    fn pop_num(frame: &mut Frame) -> Result<u64, RevertReason> {
        Self::pop(frame)?.as_num()
    }

    fn local(frame: &mut Frame, slot: u16) -> &mut Value {
        let idx = slot as usize;
        if frame.locals.len() <= idx {
            frame.locals.resize(idx + 1, Value::Num(0));
        }
        &mut frame.locals[idx]
    }

    /// Moves `value` between accounts inside the pending write set.
    fn transfer_value(
        &mut self,
        env: &VmEnv,
        from: Address,
        to: Address,
        value: u64,
    ) -> Result<(), RevertReason> {
        if value == 0 {
            return Ok(());
        }
        let from_bal = self.read_balance(env, from);
        if from_bal < value {
            return Err(RevertReason::InsufficientBalance);
        }
        self.delta(from).balance = Some(from_bal - value);
        let to_bal = self.read_balance(env, to);
        self.delta(to).balance =
            Some(to_bal.checked_add(value).ok_or(RevertReason::ArithmeticOverflow)?);
        self.events.push(VmEvent { kind: "transfer".into(), data: vec![from.0, to.0, value] });
        Ok(())
    }

    fn step(&mut self, env: &VmEnv) -> Result<StepOutcome, RevertReason> {
        let frame_idx = self.frames.len() - 1;
        let code = {
            let frame = &self.frames[frame_idx];
            (env.code)(frame.code_source)
                .or_else(|| {
                    // freshly deployed in this transaction
                    self.writes
                        .get(&frame.code_source)
                        .and_then(|d| d.deployed_code.as_deref())
                        .and_then(|name| (env.code_library)(name))
                })
                .ok_or_else(|| RevertReason::UnknownMethod(frame.method.clone()))?
        };
        let (pc, method) = {
            let frame = &self.frames[frame_idx];
            (frame.pc, frame.method.clone())
        };
        let body = code.method(&method).ok_or_else(|| RevertReason::UnknownMethod(method.clone()))?;
        if pc >= body.len() {
            // fell off the end: implicit return without value
            return self.do_return(None);
        }
        let instr = body[pc].clone();
        self.charge(match instr {
            Instr::EnterMpc { .. } => env.enter_mpc_gas,
            _ => 1,
        })?;
        let frame = &mut self.frames[frame_idx];
        frame.pc += 1;
        match instr {
            Instr::Push(v) => Self::push(frame, Value::Num(v))?,
            Instr::Pop => {
                Self::pop(frame)?;
            }
            Instr::Dup => {
                let top = frame.stack.last().ok_or(RevertReason::StackUnderflow)?.clone();
                Self::push(frame, top)?;
            }
            Instr::LoadLocal(slot) => {
                let v = Self::local(frame, slot).clone();
                Self::push(frame, v)?;
            }
            Instr::StoreLocal(slot) => {
                let v = Self::pop(frame)?;
                *Self::local(frame, slot) = v;
            }
            Instr::SLoad(key) => {
                let key = match key {
                    Some(k) => k,
                    None => Self::pop_num(frame)?,
                };
                let addr = frame.contract;
                let v = self.read_storage(env, addr, key);
                Self::push(&mut self.frames[frame_idx], Value::Num(v))?;
            }
            Instr::SStore(key) => {
                let value = Self::pop_num(frame)?;
                let key = match key {
                    Some(k) => k,
                    None => Self::pop_num(frame)?,
                };
                let addr = frame.contract;
                self.delta(addr).storage.insert(key, value);
            }
            Instr::Add | Instr::Sub | Instr::Mul | Instr::Div | Instr::Lt | Instr::Eq => {
                let b = Self::pop_num(frame)?;
                let a = Self::pop_num(frame)?;
                let r = match instr {
                    Instr::Add => a.checked_add(b).ok_or(RevertReason::ArithmeticOverflow)?,
                    Instr::Sub => a.checked_sub(b).ok_or(RevertReason::ArithmeticOverflow)?,
                    Instr::Mul => a.checked_mul(b).ok_or(RevertReason::ArithmeticOverflow)?,
                    Instr::Div => a.checked_div(b).ok_or(RevertReason::DivisionByZero)?,
                    Instr::Lt => (a < b) as u64,
                    Instr::Eq => (a == b) as u64,
                    _ => unreachable!(),
                };
                Self::push(frame, Value::Num(r))?;
            }
            Instr::Jmp(target) => {
                if target > body.len() {
                    return Err(RevertReason::BadJump(target));
                }
                frame.pc = target;
            }
            Instr::Jz(target) => {
                if target > body.len() {
                    return Err(RevertReason::BadJump(target));
                }
                let cond = Self::pop_num(frame)?;
                if cond == 0 {
                    frame.pc = target;
                }
            }
            Instr::Call { method, argc, with_value } => {
                return self.do_call(env, frame_idx, &method, argc, with_value, false);
            }
            Instr::CallCode { method, argc, with_value } => {
                return self.do_call(env, frame_idx, &method, argc, with_value, true);
            }
            Instr::Balance => {
                let addr = Address(Self::pop_num(frame)?);
                let is_contract = (env.code)(addr).is_some()
                    || self.writes.get(&addr).is_some_and(|d| d.deployed_code.is_some());
                self.access_check(env, "read balance of", addr, false, false)?;
                if is_contract && addr != Address::MPC_TX_MGR {
                    self.accessed.insert(addr);
                }
                let bal = self.read_balance(env, addr);
                Self::push(&mut self.frames[frame_idx], Value::Num(bal))?;
            }
            Instr::Transfer => {
                let value = Self::pop_num(frame)?;
                let to = Address(Self::pop_num(frame)?);
                let from = frame.contract;
                self.access_check(env, "transfer to", to, true, false)?;
                let to_is_contract = (env.code)(to).is_some();
                if to_is_contract {
                    self.accessed.insert(to);
                }
                self.transfer_value(env, from, to, value)?;
            }
            Instr::Create { code: code_name } => {
                let endowment = Self::pop_num(frame)?;
                let creator = frame.contract;
                if self.resumed_lock.is_some() {
                    return Err(RevertReason::AccessViolation(
                        "locked contract may not deploy contracts".into(),
                    ));
                }
                let program = (env.code_library)(&code_name)
                    .ok_or_else(|| RevertReason::UnknownCode(code_name.clone()))?;
                drop(program);
                let fresh = Address::fresh(creator, env.create_nonce ^ self.mixed_create_salt());
                self.delta(fresh).deployed_code = Some(code_name);
                self.accessed.insert(fresh);
                self.transfer_value(env, creator, fresh, endowment)?;
                self.events.push(VmEvent { kind: "create".into(), data: vec![fresh.0] });
                Self::push(&mut self.frames[frame_idx], Value::Num(fresh.0))?;
            }
            Instr::SelfDestruct => {
                let refund_to = Address(Self::pop_num(frame)?);
                let me = frame.contract;
                if self.resumed_lock.is_some() || env.locked.contains(&me) {
                    return Err(RevertReason::AccessViolation(
                        "locked contract may not self-destruct".into(),
                    ));
                }
                if refund_to != me {
                    self.access_check(env, "refund to", refund_to, true, false)?;
                }
                let bal = self.read_balance(env, me);
                self.transfer_value(env, me, refund_to, bal)?;
                self.delta(me).destroyed = true;
                return self.do_return(None);
            }
            Instr::EnterMpc { cid_slot, params_slot, result_slot } => {
                let cid = Self::local(frame, cid_slot).as_num()?;
                let params = Self::local(frame, params_slot).as_list()?.to_vec();
                self.mpc_invocations += 1;
                self.events.push(VmEvent { kind: "enter_mpc".into(), data: vec![cid] });
                return Ok(StepOutcome::Suspend { result_slot, cid, params });
            }
            Instr::Return { with_value } => {
                let ret = if with_value { Some(Self::pop(frame)?) } else { None };
                return self.do_return(ret);
            }
            Instr::Revert => return Err(RevertReason::ExplicitRevert),
            Instr::Timestamp => Self::push(frame, Value::Num(env.height))?,
            Instr::Caller => {
                let caller = frame.caller;
                Self::push(frame, Value::Num(caller.0))?;
            }
            Instr::Origin => {
                let origin = self.origin;
                Self::push(&mut self.frames[frame_idx], Value::Num(origin.0))?;
            }
            Instr::CallValue => {
                let v = frame.call_value;
                Self::push(frame, Value::Num(v))?;
            }
            Instr::NewList => Self::push(frame, Value::List(Vec::new()))?,
            Instr::ListPush => {
                let v = Self::pop_num(frame)?;
                let mut list = match Self::pop(frame)? {
                    Value::List(l) => l,
                    _ => return Err(RevertReason::TypeError),
                };
                list.push(v);
                Self::push(frame, Value::List(list))?;
            }
            Instr::ListGet => {
                let idx = Self::pop_num(frame)?;
                let list = Self::pop(frame)?;
                let list = list.as_list()?;
                let v = *list
                    .get(idx as usize)
                    .ok_or(RevertReason::ListIndex { index: idx, len: list.len() as u64 })?;
                Self::push(frame, Value::Num(v))?;
            }
            Instr::ListLen => {
                let list = Self::pop(frame)?;
                let len = list.as_list()?.len() as u64;
                Self::push(frame, Value::Num(len))?;
            }
        }
        Ok(StepOutcome::Continue)
    }

    /// Salt for addresses created by inner CREATEs so that several creates
    /// in one transaction stay distinct.
    fn mixed_create_salt(&self) -> u64 {
        let creates =
            self.events.iter().filter(|e| e.kind == "create").count() as u64;
        u64::from_le_bytes(self.tx_hash.0[..8].try_into().unwrap()).wrapping_add(creates)
    }

    fn do_call(
        &mut self,
        env: &VmEnv,
        frame_idx: usize,
        method: &str,
        argc: u8,
        with_value: bool,
        borrow_code: bool,
    ) -> Result<StepOutcome, RevertReason> {
        if self.frames.len() >= MAX_CALL_DEPTH {
            return Err(RevertReason::CallDepthExceeded);
        }
        let frame = &mut self.frames[frame_idx];
        let mut args = Vec::with_capacity(argc as usize);
        for _ in 0..argc {
            args.push(Self::pop(frame)?);
        }
        args.reverse();
        let value = if with_value { Self::pop_num(frame)? } else { 0 };
        let target = Address(Self::pop_num(frame)?);
        let caller_contract = frame.contract;
        self.access_check(env, "call", target, with_value, borrow_code)?;
        let target_code = (env.code)(target).or_else(|| {
            self.writes.get(&target).and_then(|d| d.deployed_code.as_deref()).and_then(|n| (env.code_library)(n))
        });
        if borrow_code {
            // Execution stays in the caller's storage context; value, when
            // attached, is paid to the code provider.
            if target_code.is_none() {
                return Err(RevertReason::UnknownMethod(method.to_string()));
            }
            self.transfer_value(env, caller_contract, target, value)?;
            self.frames.push(Frame {
                contract: caller_contract,
                code_source: target,
                method: method.to_string(),
                pc: 0,
                locals: args,
                stack: Vec::new(),
                caller: caller_contract,
                call_value: value,
            });
            return Ok(StepOutcome::Continue);
        }
        if target_code.is_none() {
            // plain account: a call degenerates to a transfer
            self.transfer_value(env, caller_contract, target, value)?;
            Self::push(&mut self.frames[frame_idx], Value::Num(0))?;
            return Ok(StepOutcome::Continue);
        }
        self.accessed.insert(target);
        self.transfer_value(env, caller_contract, target, value)?;
        self.frames.push(Frame {
            contract: target,
            code_source: target,
            method: method.to_string(),
            pc: 0,
            locals: args,
            stack: Vec::new(),
            caller: caller_contract,
            call_value: value,
        });
        Ok(StepOutcome::Continue)
    }

    fn do_return(&mut self, ret: Option<Value>) -> Result<StepOutcome, RevertReason> {
        self.frames.pop();
        match self.frames.last_mut() {
            None => Ok(StepOutcome::Halted(ret)),
            Some(caller) => {
                Self::push(caller, ret.unwrap_or(Value::Num(0)))?;
                Ok(StepOutcome::Continue)
            }
        }
    }
}

/// Drives a fresh method invocation to a terminal outcome.
#[allow(clippy::too_many_arguments)]
pub fn exec_method(
    env: &VmEnv,
    tx_hash: TxHash,
    origin: Address,
    sender: Address,
    target: Address,
    method: &str,
    args: Vec<Value>,
    call_value: u64,
    gas_limit: u64,
) -> ExecOutcome {
    let mut ctx = ExecutionContext::new(tx_hash, origin, gas_limit);
    ctx.accessed.insert(target);
    ctx.frames.push(Frame {
        contract: target,
        code_source: target,
        method: method.to_string(),
        pc: 0,
        locals: args,
        stack: Vec::new(),
        caller: sender,
        call_value,
    });
    if call_value > 0 {
        if let Err(reason) = ctx.transfer_value(env, sender, target, call_value) {
            return ExecOutcome::Reverted { reason, gas_used: ctx.gas_used };
        }
    }
    run(env, ctx)
}

/// Deploys a named program at a fresh address and runs its constructor
/// (the `init` method) when present.
#[allow(clippy::too_many_arguments)]
pub fn exec_create(
    env: &VmEnv,
    tx_hash: TxHash,
    sender: Address,
    fresh: Address,
    code_name: &str,
    args: Vec<Value>,
    value: u64,
    gas_limit: u64,
) -> ExecOutcome {
    let mut ctx = ExecutionContext::new(tx_hash, sender, gas_limit);
    let Some(program) = (env.code_library)(code_name) else {
        return ExecOutcome::Reverted {
            reason: RevertReason::UnknownCode(code_name.to_string()),
            gas_used: 0,
        };
    };
    ctx.delta(fresh).deployed_code = Some(code_name.to_string());
    ctx.accessed.insert(fresh);
    if value > 0 {
        if let Err(reason) = ctx.transfer_value(env, sender, fresh, value) {
            return ExecOutcome::Reverted { reason, gas_used: ctx.gas_used };
        }
    }
    ctx.events.push(VmEvent { kind: "create".into(), data: vec![fresh.0] });
    if program.method("init").is_none() {
        return ExecOutcome::Completed { ctx, ret: Some(Value::Num(fresh.0)) };
    }
    ctx.frames.push(Frame {
        contract: fresh,
        code_source: fresh,
        method: "init".to_string(),
        pc: 0,
        locals: args,
        stack: Vec::new(),
        caller: sender,
        call_value: value,
    });
    match run(env, ctx) {
        ExecOutcome::Completed { ctx, .. } => {
            ExecOutcome::Completed { ctx, ret: Some(Value::Num(fresh.0)) }
        }
        other => other,
    }
}

/// Resumes a saved context with the MPC result written into the designated
/// local. All further access is checked against the locked contract.
pub fn resume(env: &VmEnv, saved: &SavedMpcState, mpc_result: &[u64]) -> ExecOutcome {
    let mut ctx = saved.context.clone();
    ctx.resumed_lock = Some(saved.locked_contract);
    let top = ctx.frames.len() - 1;
    {
        let frame = &mut ctx.frames[top];
        // pc still points at the enter_mpc instruction; deliver and advance.
        *ExecutionContext::local(frame, saved.result_slot) = Value::List(mpc_result.to_vec());
        frame.pc += 1;
    }
    ctx.events.push(VmEvent { kind: "mpc_resume".into(), data: mpc_result.to_vec() });
    run(env, ctx)
}

fn run(env: &VmEnv, mut ctx: ExecutionContext) -> ExecOutcome {
    loop {
        match ctx.step(env) {
            Ok(StepOutcome::Continue) => {}
            Ok(StepOutcome::Halted(ret)) => return ExecOutcome::Completed { ctx, ret },
            Ok(StepOutcome::Suspend { result_slot, cid, params }) => {
                // rewind pc onto the enter_mpc instruction for re-delivery
                let top = ctx.frames.len() - 1;
                ctx.frames[top].pc -= 1;
                return ExecOutcome::Suspended { ctx, result_slot, cid, params };
            }
            Err(reason) => {
                let gas_used = ctx.gas_used;
                return ExecOutcome::Reverted { reason, gas_used };
            }
        }
    }
}
