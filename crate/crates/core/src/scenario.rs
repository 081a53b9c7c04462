//! Declarative scenario files: committee size, circuits, contract
//! deployments, workload, faults, and run length, parsed from TOML into a
//! ready-to-run simulation.
//!
//! Argument strings bind late: `@parties` becomes the committee address
//! list, `@party:3` one member's address, `@contract:c2` a deployed
//! contract's address, `@streamers` the workload accounts, `list:1,2,3` a
//! literal list, anything else a number.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::circuit::{
    build_auction_circuit, build_compare_circuit, build_mult_circuit, build_parallel_mult_circuit,
    build_voting_circuit, Circuit,
};
use crate::engine::{ActivationPoint, FaultBehavior, FaultSpec};
use crate::field::Field;
use crate::fixtures;
use crate::netsim::{
    ArgSpec, PlannedAction, PlannedTx, SenderSpec, Sim, SimConfig, SimError, SimSetup, StreamKind,
};
use crate::vm::asm;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub parties: Parties,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub circuits: Vec<CircuitSpec>,
    #[serde(default)]
    pub contracts: Vec<ContractSpec>,
    #[serde(default)]
    pub calls: Vec<CallSpec>,
    #[serde(default)]
    pub secret_inputs: Vec<SecretInput>,
    #[serde(default)]
    pub workload: Workload,
    #[serde(default)]
    pub faults: Vec<FaultSection>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Parties {
    pub n: usize,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldSection {
    pub bit_width: u32,
    pub prime: u64,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection { bit_width: crate::field::DEFAULT_BIT_WIDTH, prime: crate::field::DEFAULT_PRIME }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainSection {
    pub block_interval: u64,
    pub max_txs_per_block: usize,
    pub run_blocks: u64,
    pub latency: u64,
    pub dispute_window: u64,
    pub max_parallel_mults: usize,
    pub enter_mpc_gas: u64,
    pub sync_mode: bool,
    pub tick_budget: u64,
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            block_interval: 10,
            max_txs_per_block: 400,
            run_blocks: 300,
            latency: 1,
            dispute_window: 2,
            max_parallel_mults: 4,
            enter_mpc_gas: 1000,
            sync_mode: false,
            tick_budget: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub builder: String,
    #[serde(default)]
    pub parties: usize,
    #[serde(default)]
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractSpec {
    pub handle: String,
    pub fixture: String,
    #[serde(default = "default_deploy_block")]
    pub deploy_at: u64,
    #[serde(default)]
    pub sender: Option<String>,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub value: u64,
    /// Assembly source for fixtures not in the bundled library.
    #[serde(default)]
    pub source: Option<String>,
}

fn default_deploy_block() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CallSpec {
    pub at_block: u64,
    #[serde(default)]
    pub repeat_every: u64,
    #[serde(default)]
    pub until_block: u64,
    pub sender: String,
    pub contract: String,
    pub method: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub value: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SecretInput {
    pub party: usize,
    pub values: Vec<u64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Workload {
    /// "eth" or "token" to saturate blocks with a transfer stream.
    pub stream: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaultSection {
    pub party: usize,
    pub behavior: FaultBehavior,
    pub activation: ActivationPoint,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let Parties { n, t } = self.parties;
        if n < 3 * t + 1 {
            return Err(ScenarioError::Invalid(format!("parties: n={n} below 3t+1 for t={t}")));
        }
        if self.faults.len() > t {
            return Err(ScenarioError::Invalid(format!(
                "faults: {} specified, at most t={t} tolerated",
                self.faults.len()
            )));
        }
        for f in &self.faults {
            if f.party >= n {
                return Err(ScenarioError::Invalid(format!("faults: party {} out of range", f.party)));
            }
        }
        let field = Field::new(self.field.prime, self.field.bit_width)
            .map_err(|e| ScenarioError::Invalid(format!("field: {e}")))?;
        let circuits = self.build_circuits()?;
        for (i, c) in circuits.iter().enumerate() {
            c.validate().map_err(|e| ScenarioError::Invalid(format!("circuits[{i}]: {e}")))?;
            if c.n_parties > n {
                return Err(ScenarioError::Invalid(format!(
                    "circuits[{i}]: declares {} parties, committee has {n}",
                    c.n_parties
                )));
            }
        }
        for s in &self.secret_inputs {
            if s.party >= n {
                return Err(ScenarioError::Invalid(format!(
                    "secret_inputs: party {} out of range",
                    s.party
                )));
            }
            for v in &s.values {
                field.check_input(*v).map_err(|e| {
                    ScenarioError::Invalid(format!("secret_inputs: party {}: {e}", s.party))
                })?;
            }
        }
        let mut handles: Vec<&str> = Vec::new();
        for c in &self.contracts {
            parse_sender(c.sender.as_deref().unwrap_or("organizer"))?;
            if c.source.is_none() && !fixtures::bundled_sources().iter().any(|(n, _)| *n == c.fixture)
            {
                return Err(ScenarioError::Invalid(format!(
                    "contracts: unknown fixture {}",
                    c.fixture
                )));
            }
            handles.push(&c.handle);
        }
        for call in &self.calls {
            parse_sender(&call.sender)?;
            if !handles.contains(&call.contract.as_str()) {
                return Err(ScenarioError::Invalid(format!(
                    "calls: unknown contract handle {}",
                    call.contract
                )));
            }
        }
        if let Some(s) = &self.workload.stream {
            if s != "eth" && s != "token" {
                return Err(ScenarioError::Invalid(format!("workload.stream: unknown kind {s}")));
            }
        }
        Ok(())
    }

    fn build_circuits(&self) -> Result<Vec<Circuit>, ScenarioError> {
        self.circuits
            .iter()
            .map(|spec| {
                let n = if spec.parties == 0 { self.parties.n } else { spec.parties };
                match spec.builder.as_str() {
                    "voting" => Ok(build_voting_circuit(n)),
                    "auction" => Ok(build_auction_circuit(n)),
                    "mult" => Ok(build_mult_circuit(self.parties.n)),
                    "compare" => Ok(build_compare_circuit(self.parties.n)),
                    "parallel_mults" => {
                        Ok(build_parallel_mult_circuit(self.parties.n, spec.count.max(1)))
                    }
                    other => Err(ScenarioError::Invalid(format!("unknown circuit builder {other}"))),
                }
            })
            .collect()
    }

    /// Resolves the scenario into a bootable simulation.
    pub fn build(&self) -> Result<Sim, ScenarioError> {
        self.validate()?;
        let field = Field::new(self.field.prime, self.field.bit_width)
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let config = SimConfig {
            seed: self.seed,
            n_parties: self.parties.n,
            threshold: self.parties.t,
            field,
            block_interval: self.chain.block_interval,
            max_txs_per_block: self.chain.max_txs_per_block,
            run_blocks: self.chain.run_blocks,
            p2p_latency: self.chain.latency,
            latency_overrides: BTreeMap::new(),
            dispute_window: self.chain.dispute_window,
            max_parallel_mults: self.chain.max_parallel_mults,
            enter_mpc_gas: self.chain.enter_mpc_gas,
            sync_mode: self.chain.sync_mode,
            tick_budget: self.chain.tick_budget,
        };
        let mut code_library = fixtures::bundled_library();
        for c in &self.contracts {
            if let Some(src) = &c.source {
                let program = asm::parse_program(src)
                    .map_err(|e| ScenarioError::Invalid(format!("contract {}: {e}", c.handle)))?;
                code_library.insert(c.fixture.clone(), Arc::new(program));
            }
        }
        let stream = match self.workload.stream.as_deref() {
            Some("eth") => Some(StreamKind::EthTransfer),
            Some("token") => Some(StreamKind::TokenTransfer),
            _ => None,
        };
        let mut planned = Vec::new();
        if stream == Some(StreamKind::TokenTransfer) {
            planned.push(PlannedTx {
                at_block: 1,
                repeat_every: 0,
                until_block: 0,
                sender: SenderSpec::Organizer,
                action: PlannedAction::Deploy {
                    handle: "token".into(),
                    code: "token".into(),
                    args: vec![ArgSpec::StreamList, ArgSpec::Num(1 << 40)],
                    value: 0,
                },
            });
        }
        for c in &self.contracts {
            planned.push(PlannedTx {
                at_block: c.deploy_at,
                repeat_every: 0,
                until_block: 0,
                sender: parse_sender(c.sender.as_deref().unwrap_or("organizer"))?,
                action: PlannedAction::Deploy {
                    handle: c.handle.clone(),
                    code: c.fixture.clone(),
                    args: parse_args(&c.args)?,
                    value: c.value,
                },
            });
        }
        for call in &self.calls {
            planned.push(PlannedTx {
                at_block: call.at_block,
                repeat_every: call.repeat_every,
                until_block: call.until_block,
                sender: parse_sender(&call.sender)?,
                action: PlannedAction::Call {
                    target: call.contract.clone(),
                    method: call.method.clone(),
                    args: parse_args(&call.args)?,
                    value: call.value,
                },
            });
        }
        let secret_inputs: BTreeMap<usize, Vec<u64>> =
            self.secret_inputs.iter().map(|s| (s.party, s.values.clone())).collect();
        let faults: Vec<FaultSpec> = self
            .faults
            .iter()
            .map(|f| FaultSpec { party: f.party, behavior: f.behavior, activation: f.activation })
            .collect();
        let setup = SimSetup {
            config,
            circuits: self.build_circuits()?,
            code_library,
            planned,
            secret_inputs,
            faults,
            stream,
        };
        Ok(Sim::new(setup)?)
    }

    /// Builds, runs the full block horizon, and returns the simulation.
    pub fn run(&self) -> Result<Sim, ScenarioError> {
        let mut sim = self.build()?;
        sim.run_to_end()?;
        Ok(sim)
    }

    /// Plaintext expectation for a session of the given circuit: evaluates
    /// the registered circuit on this scenario's secret inputs and the
    /// session's public inputs.
    pub fn plain_expectation(&self, cid: usize, public_inputs: &[u64]) -> Option<Vec<u64>> {
        let circuits = self.build_circuits().ok()?;
        let circuit = circuits.get(cid)?;
        let inputs: Vec<Vec<u64>> = (0..circuit.n_parties)
            .map(|p| {
                let declared = circuit.secret_input_shape[p];
                let values = self
                    .secret_inputs
                    .iter()
                    .find(|s| s.party == p)
                    .map(|s| s.values.clone())
                    .unwrap_or_default();
                (0..declared).map(|i| values.get(i).copied().unwrap_or(0)).collect()
            })
            .collect();
        Some(crate::circuit::eval_plain(circuit, &inputs, public_inputs))
    }
}

fn parse_sender(text: &str) -> Result<SenderSpec, ScenarioError> {
    if text == "organizer" || text == "org" {
        return Ok(SenderSpec::Organizer);
    }
    if let Some(rest) = text.strip_prefix("party:") {
        let i = rest
            .parse()
            .map_err(|_| ScenarioError::Invalid(format!("bad sender spec {text}")))?;
        return Ok(SenderSpec::Party(i));
    }
    if let Some(rest) = text.strip_prefix("stream:") {
        let i = rest
            .parse()
            .map_err(|_| ScenarioError::Invalid(format!("bad sender spec {text}")))?;
        return Ok(SenderSpec::Stream(i));
    }
    Err(ScenarioError::Invalid(format!("bad sender spec {text}")))
}

fn parse_args(args: &[String]) -> Result<Vec<ArgSpec>, ScenarioError> {
    args.iter()
        .map(|a| {
            if a == "@parties" {
                Ok(ArgSpec::PartyList)
            } else if a == "@streamers" {
                Ok(ArgSpec::StreamList)
            } else if let Some(rest) = a.strip_prefix("@party:") {
                rest.parse()
                    .map(ArgSpec::Party)
                    .map_err(|_| ScenarioError::Invalid(format!("bad arg {a}")))
            } else if let Some(rest) = a.strip_prefix("@contract:") {
                Ok(ArgSpec::Contract(rest.to_string()))
            } else if let Some(rest) = a.strip_prefix("list:") {
                if rest.is_empty() {
                    return Ok(ArgSpec::List(Vec::new()));
                }
                rest.split(',')
                    .map(|x| x.trim().parse::<u64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map(ArgSpec::List)
                    .map_err(|_| ScenarioError::Invalid(format!("bad arg {a}")))
            } else {
                a.parse()
                    .map(ArgSpec::Num)
                    .map_err(|_| ScenarioError::Invalid(format!("bad arg {a}")))
            }
        })
        .collect()
}

/// Bundled scenario files, runnable by name.
pub fn bundled_scenarios() -> Vec<(&'static str, &'static str)> {
    vec![
        ("voting_10", include_str!("../scenarios/voting_10.toml")),
        ("auction_10", include_str!("../scenarios/auction_10.toml")),
        ("lock_matrix", include_str!("../scenarios/lock_matrix.toml")),
        ("malicious_dealer", include_str!("../scenarios/malicious_dealer.toml")),
        ("throughput_eth", include_str!("../scenarios/throughput_eth.toml")),
        ("throughput_eth_baseline", include_str!("../scenarios/throughput_eth_baseline.toml")),
        ("throughput_eth_sync", include_str!("../scenarios/throughput_eth_sync.toml")),
        ("queue_discipline", include_str!("../scenarios/queue_discipline.toml")),
    ]
}

pub fn bundled_scenario(name: &str) -> Option<Scenario> {
    bundled_scenarios()
        .into_iter()
        .find(|(n, _)| *n == name)
        .and_then(|(_, text)| Scenario::parse(text).ok())
}
