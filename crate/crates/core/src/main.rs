use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tactile_surface::labeler::SurfaceLabel;
use tactile_surface::pipeline::{Pipeline, PipelineConfig};
use tactile_surface::Error;

#[derive(Parser)]
#[command(name = "tactile-surface", version, about = "Sim-to-real tactile surface classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (JSON). Omitted sections take their defaults.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Scalar override, `dotted.key=value`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Poisson-disk sample every object mesh.
    Sample(Common),
    /// Label the sampled clouds flat / curve / edge / corner.
    Label(Common),
    /// Render the sim training set and the perturbed-optics sets.
    Simulate(Common),
    /// Train the denoiser on the real training images.
    TrainDiffusion(Common),
    /// Translate the sim training set toward the real domain.
    Translate(Common),
    /// Train the surface classifier.
    TrainClassifier(Common),
    /// Score the classifier on the real test set.
    Evaluate(Common),
    /// Export the points of an object that carry a predicted label.
    Hypothesize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        object: String,
        /// flat, curve, edge or corner.
        #[arg(long)]
        label: SurfaceLabel,
    },
    /// Run every stage from sample through evaluate.
    All(Common),
}

fn pipeline(common: &Common) -> tactile_surface::Result<Pipeline> {
    let mut overrides = common.overrides.clone();
    if let Some(s) = common.seed {
        overrides.push(format!("seed={s}"));
    }
    let (config, base) = PipelineConfig::load(&common.config, &overrides)?;
    Ok(Pipeline::new(config, base))
}

fn run(cli: Cli) -> tactile_surface::Result<()> {
    match cli.command {
        Command::Sample(c) => sample(&pipeline(&c)?),
        Command::Label(c) => label(&pipeline(&c)?),
        Command::Simulate(c) => simulate(&pipeline(&c)?),
        Command::TrainDiffusion(c) => train_diffusion(&pipeline(&c)?),
        Command::Translate(c) => translate(&pipeline(&c)?),
        Command::TrainClassifier(c) => train_classifier(&pipeline(&c)?),
        Command::Evaluate(c) => evaluate(&pipeline(&c)?),
        Command::Hypothesize { common, object, label } => {
            let h = pipeline(&common)?.hypothesize(&object, label)?;
            println!("{} {} points: {} -> {}", h.object, h.label, h.points, h.ply.display());
            Ok(())
        }
        Command::All(c) => {
            let p = pipeline(&c)?;
            sample(&p)?;
            label(&p)?;
            simulate(&p)?;
            train_diffusion(&p)?;
            translate(&p)?;
            train_classifier(&p)?;
            evaluate(&p)
        }
    }
}

fn sample(p: &Pipeline) -> tactile_surface::Result<()> {
    for (name, n) in p.sample()? {
        println!("{name}: {n} points");
    }
    Ok(())
}

fn label(p: &Pipeline) -> tactile_surface::Result<()> {
    println!("object,flat,curve,edge,corner,inherited");
    for s in p.label()? {
        let [a, b, c, d] = s.histogram;
        println!("{},{a},{b},{c},{d},{}", s.object, s.fallbacks);
    }
    Ok(())
}

fn simulate(p: &Pipeline) -> tactile_surface::Result<()> {
    let [sim, real, test] = p.simulate()?;
    println!("train_sim {sim}, train_real {real}, test_real {test} images");
    Ok(())
}

fn train_diffusion(p: &Pipeline) -> tactile_surface::Result<()> {
    let curve = p.train_diffusion()?;
    let tail = &curve[curve.len().saturating_sub(100)..];
    if !tail.is_empty() {
        println!("denoiser loss (last {} steps) {:.4}", tail.len(), tail.iter().sum::<f64>() / tail.len() as f64);
    }
    Ok(())
}

fn translate(p: &Pipeline) -> tactile_surface::Result<()> {
    let s = p.translate()?;
    println!(
        "translated {} images; channel-statistic distance to real {:.4} -> {:.4}",
        s.images, s.distance_before, s.distance_after
    );
    Ok(())
}

fn train_classifier(p: &Pipeline) -> tactile_surface::Result<()> {
    let s = p.train_classifier()?;
    if let Some(l) = s.final_losses {
        match l.bce {
            Some(bce) => println!("final ce {:.4}, domain bce {bce:.4}", l.ce),
            None => println!("final ce {:.4}", l.ce),
        }
    }
    if let Some(a) = s.probe_accuracy {
        println!("domain probe accuracy {a:.3}");
    }
    Ok(())
}

fn evaluate(p: &Pipeline) -> tactile_surface::Result<()> {
    let r = p.evaluate()?;
    println!("accuracy {:.4} ({}/{})", r.accuracy, r.correct, r.total);
    for g in &r.groups {
        println!("  {}: {:.4} ({}/{})", g.group, g.accuracy, g.correct, g.count);
    }
    for c in &r.per_class {
        match c.f1 {
            Some(f1) => println!("  {} f1 {f1:.4}", c.label),
            None => println!("  {} f1 n/a", c.label),
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::MissingInput { .. } => 3,
        Error::NonFinite(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
