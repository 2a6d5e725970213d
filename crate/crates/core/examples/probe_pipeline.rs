// temporary probe
use taskless_core::diversity::*;
use taskless_core::pipeline::*;

fn main() {
    for seed in [42u64, 7, 123] {
        let cfg = RunConfig::new(seed);
        let ens = train_diverse(&cfg.spec, &cfg.diversity, &cfg.cem).unwrap();
        let ratio = ens.round_min_pairwise.last().unwrap() / ens.round_min_pairwise[0];
        println!("seed {seed}: rounds {:?} ratio {ratio:.2}", ens.round_min_pairwise.iter().map(|x| (x*100.0).round()/100.0).collect::<Vec<_>>());
    }
}
