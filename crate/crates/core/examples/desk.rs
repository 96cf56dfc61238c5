//! Runs the desk-scale comparison and the group-volume curve. Environment
//! variables override the defaults for exploration.

use std::env;
use std::time::Instant;

use hatesense::experiments::{run_dispersion_experiment, run_fig3_curve, CorpusSource, ExperimentSpec};
use hatesense::synth::{GroupSpec, SynthSpec};

fn var<T: std::str::FromStr>(name: &str, default: T) -> T {
    env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() -> hatesense::Result<()> {
    let seeds: Vec<u64> = (0..var("SEEDS", 5u64)).collect();
    let mut spec = ExperimentSpec::desk_scale(seeds);
    let mut s = SynthSpec::desk_benchmark(var("CSEED", 0));
    if env::var("N").is_ok() || env::var("STARVE").is_ok() {
        let n: usize = var("N", 100);
        let starve: usize = var("STARVE", 8);
        s.groups = (1..=4).map(|i| GroupSpec::new(format!("g{i}"), n, n)).collect();
        s.groups.push(GroupSpec::new("g5", n, n).disjoint().starved(starve, starve));
    }
    s.noise = var("NOISE", s.noise);
    s.lexicon_size = var("LEX", s.lexicon_size);
    s.test_fraction = var("TESTF", s.test_fraction);
    s.dev_fraction = var("DEVF", s.dev_fraction);
    spec.corpus = CorpusSource::Synth(s);
    spec.train.epochs = var("EPOCHS", spec.train.epochs);
    spec.train.batch_size = var("BATCH", spec.train.batch_size);
    spec.train.adam.learning_rate = var("LR", spec.train.adam.learning_rate);
    spec.method.weights.consensus = var("WC", spec.method.weights.consensus);
    spec.method.weights.unique = var("WU", spec.method.weights.unique);
    for arm in [&mut spec.baseline, &mut spec.method] {
        arm.model.encoder.d_model = var("DM", arm.model.encoder.d_model);
        arm.model.encoder.d_ff = 2 * arm.model.encoder.d_model;
        arm.model.d_hidden = arm.model.encoder.d_model;
        arm.model.encoder.n_layers = var("LAYERS", arm.model.encoder.n_layers);
        arm.model.encoder.dropout_rate = var("DROP", arm.model.encoder.dropout_rate);
        arm.model.temperature = var("TEMP", arm.model.temperature);
    }
    let t = Instant::now();
    let summary = run_dispersion_experiment(&spec)?;
    for r in &summary.runs {
        print!(
            "seed {} B avg {:.3} disp {:.3} all {:.3} | M avg {:.3} disp {:.3} all {:.3} |",
            r.seed, r.baseline.average, r.baseline.dispersion, r.baseline.overall_accuracy,
            r.method.average, r.method.dispersion, r.method.overall_accuracy
        );
        for (b, m) in r.baseline.groups.iter().zip(&r.method.groups) {
            print!(" {}:{:.2}/{:.2}", b.name, b.accuracy, m.accuracy);
        }
        println!();
    }
    print!("{}", summary.render());
    println!("dispersion experiment: {:.1}s", t.elapsed().as_secs_f64());
    if var("CURVE", 1u8) == 1 {
        let t = Instant::now();
        let full: usize = var("STARVE", 8usize) * 2;
        let curve = run_fig3_curve(&spec, "g5", &[0, full / 4, full / 2, full])?;
        println!("curve median {:?} monotone {}", curve.median, curve.nearly_monotone());
        println!("curve: {:.1}s", t.elapsed().as_secs_f64());
    }
    Ok(())
}
