use mpcvm_core::ledger::TxKind;
use mpcvm_core::scenario::bundled_scenario;

fn main() {
    let scenario = bundled_scenario("auction_10").unwrap();
    let sim = scenario.run().unwrap();
    for c in sim.committed.iter().filter(|c| c.height >= 6 && c.height <= 9) {
        let kind = match &c.tx.kind {
            TxKind::MpcMessage { msg, .. } => format!("msg:{}", msg.kind_name()),
            TxKind::MpcRet { .. } => "ret".into(),
            TxKind::Regular { method, .. } => format!("call:{method}"),
            TxKind::Create { code, .. } => format!("create:{code}"),
        };
        println!("h{} sender={:x} {:?} {}", c.height, c.tx.sender.0, c.status, kind);
    }
}
