use mpcvm_core::report::throughput_comparison;
use mpcvm_core::scenario::bundled_scenario;

fn main() {
    let t0 = std::time::Instant::now();
    let baseline = bundled_scenario("throughput_eth_baseline").unwrap().run().unwrap();
    println!("baseline: avg={} milli ({:?})", baseline.regular_commits_per_block_milli(), t0.elapsed());
    let t1 = std::time::Instant::now();
    let mixed = bundled_scenario("throughput_eth").unwrap().run().unwrap();
    println!("mixed: avg={} sessions={} ({:?})", mixed.regular_commits_per_block_milli(), mixed.sessions.len(), t1.elapsed());
    let t2 = std::time::Instant::now();
    let sync = bundled_scenario("throughput_eth_sync").unwrap().run().unwrap();
    println!("sync: avg={} sessions={} ({:?})", sync.regular_commits_per_block_milli(), sync.sessions.len(), t2.elapsed());
    let cmp = throughput_comparison(&baseline, &mixed);
    println!("async cmp: {cmp:?}");
    let cmp_sync = throughput_comparison(&baseline, &sync);
    println!("sync cmp: {cmp_sync:?}");
}
