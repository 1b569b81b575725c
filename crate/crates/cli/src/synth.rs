use anyhow::bail;
use clap::Args;
use msgstat::numfmt::format_ext;
use msgstat::synth::draw_probabilities;
use msgstat::SyntheticSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::output::{OutDir, Summary};
use crate::OutArgs;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of message rows.
    #[arg(long, default_value_t = 200)]
    messages: usize,
    #[arg(long, default_value_t = 2000)]
    size_a: usize,
    #[arg(long, default_value_t = 2000)]
    size_b: usize,
    /// Lower bound of the uniform draw for message probabilities.
    #[arg(long, default_value_t = 0.01)]
    p_min: f64,
    /// Upper bound of the uniform draw for message probabilities.
    #[arg(long, default_value_t = 0.3)]
    p_max: f64,
    /// Fraction of corpus A drawn from B's probabilities.
    #[arg(long, default_value_t = 0.2)]
    contamination_a: f64,
    /// Fraction of corpus B drawn from A's probabilities.
    #[arg(long, default_value_t = 0.5)]
    contamination_b: f64,
    /// Redraw probability vectors until Σ|p_a − p_b| reaches this value.
    #[arg(long, default_value_t = 0.0)]
    min_separation: f64,
    /// Use the same probability vector for both corpora.
    #[arg(long)]
    identical: bool,
    #[arg(long, env = "MSGSTAT_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

const MAX_DRAWS: usize = 10_000;

pub fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&args.p_min) || !(args.p_min < args.p_max && args.p_max <= 1.0) {
        bail!("need 0 <= p_min < p_max <= 1");
    }
    if args.size_a == 0 || args.size_b == 0 {
        bail!("corpus sizes must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (p_a, p_b) = (0..MAX_DRAWS)
        .map(|_| {
            let p_a = draw_probabilities(&mut rng, args.messages, args.p_min, args.p_max);
            let p_b = if args.identical {
                p_a.clone()
            } else {
                draw_probabilities(&mut rng, args.messages, args.p_min, args.p_max)
            };
            (p_a, p_b)
        })
        .find(|(a, b)| separation(a, b) >= args.min_separation)
        .ok_or_else(|| anyhow::anyhow!("no draw reached separation {} in {MAX_DRAWS} tries", args.min_separation))?;

    let spec = SyntheticSpec {
        n_messages: args.messages,
        size_a: args.size_a,
        size_b: args.size_b,
        p_a,
        p_b,
        contamination_a: args.contamination_a,
        contamination_b: args.contamination_b,
        seed: rng.random(),
    };
    let corpus = spec.generate()?;

    let out = OutDir::create(&args.out.out)?;
    out.write("matrix_a.csv", |w| Ok(corpus.a.write_csv(w)?))?;
    out.write("matrix_b.csv", |w| Ok(corpus.b.write_csv(w)?))?;
    out.write("truth_a.csv", |w| Ok(corpus.truth_a.write_csv(w)?))?;
    out.write("truth_b.csv", |w| Ok(corpus.truth_b.write_csv(w)?))?;
    out.write("probabilities.csv", |w| {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["row", "p_a", "p_b"])?;
        for (k, (a, b)) in spec.p_a.iter().zip(&spec.p_b).enumerate() {
            wtr.write_record([(k + 1).to_string(), format_ext(*a), format_ext(*b)])?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    out.write("spec.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &spec)?;
        Ok(w.write_all(b"\n")?)
    })?;

    let mut summary = Summary::default();
    summary.add("messages", spec.n_messages);
    summary.add("files_a", spec.size_a);
    summary.add("files_b", spec.size_b);
    summary.add("separation", format_ext(separation(&spec.p_a, &spec.p_b)));
    summary.add("seed", args.seed);
    summary.add("generator_seed", spec.seed);
    summary.write(&out, "summary.csv")?;
    summary.print();
    Ok(())
}

fn separation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
