//! `rgr`: synthesize datasets, train the classifier, stream and evaluate.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use rgr_core::classifier::{Checkpoint, Schedule, TrainConfig};
use rgr_core::gesture_sim::GestureClass;
use rgr_core::pipeline::{
    calibrate, evaluate, fit_normalization, load_processed, offline_accuracy, read_labels, read_manifest,
    run_stream, score_recording, split, train_classifier, write_dataset, DatasetSpec, EvalReport, LabelSegment,
    PipelineConfig, RecordingFile,
};
use rgr_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(name = "rgr", version, about = "Radar gesture recognition pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> rgr_core::Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset: recordings, label files and a manifest.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
        /// Comma-separated class names; all classes when omitted.
        #[arg(long, value_delimiter = ',')]
        classes: Vec<String>,
    },
    /// Train the classifier on a dataset directory.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3000)]
        steps: u64,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        /// Full-length schedule (15000 steps, batch 128) instead of the desk run.
        #[arg(long)]
        reference: bool,
        /// Continue from this checkpoint's weights and optimizer state.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long, default_value_t = 0.2)]
        val_fraction: f64,
        #[arg(long, default_value_t = 100)]
        log_every: u64,
    },
    /// Run the streaming pipeline over one recording.
    Stream {
        #[command(flatten)]
        common: Common,
        recording: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Pace cycles at the PRI.
        #[arg(long)]
        realtime: bool,
    },
    /// Stream every recording of a dataset and report detection and class scores.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Without a checkpoint only the detector is evaluated.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Calibrate γ1 on synthetic noise and print (or write) the configuration.
    CalibrateHad {
        #[command(flatten)]
        common: Common,
        /// Dataset whose median noise level is used.
        #[arg(long, conflicts_with = "noise_std")]
        data: Option<PathBuf>,
        #[arg(long)]
        noise_std: Option<f64>,
        /// Configuration file to write with the calibrated γ1.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Divergence(_) => EXIT_DIVERGENCE,
                _ => EXIT_DATA,
            })
        }
    }
}

fn checkpoint_for(config: &PipelineConfig, flag: Option<PathBuf>) -> rgr_core::Result<Option<Arc<Checkpoint>>> {
    match flag.or_else(|| config.checkpoint.clone()) {
        Some(p) => Ok(Some(Arc::new(Checkpoint::load(&p)?))),
        None => Ok(None),
    }
}

fn read_dataset(dir: &Path) -> rgr_core::Result<Vec<(PathBuf, Vec<LabelSegment>)>> {
    read_manifest(dir)?
        .into_iter()
        .map(|e| {
            let p = dir.join(&e.file);
            let labels = read_labels(&p)?;
            Ok((p, labels))
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

fn run(cmd: Command) -> rgr_core::Result<()> {
    match cmd {
        Command::Synth {
            common,
            out,
            per_class,
            snr_db,
            classes,
        } => {
            let config = common.load()?;
            let classes = if classes.is_empty() {
                GestureClass::ALL.to_vec()
            } else {
                classes.iter().map(|c| GestureClass::from_name(c)).collect::<rgr_core::Result<_>>()?
            };
            let spec = DatasetSpec {
                classes,
                per_class,
                seed: config.seed,
                snr_db,
            };
            let manifest = write_dataset(&spec, &config, &out)?;
            println!("recordings={}", manifest.len());
            println!("out={}", out.display());
        }
        Command::Train {
            common,
            data,
            out,
            steps,
            batch,
            reference,
            resume,
            val_fraction,
            log_every,
        } => {
            let config = common.load()?;
            let mut tc = if reference { TrainConfig::reference() } else { TrainConfig::desk() };
            if !reference {
                tc.steps = steps;
                tc.batch_size = batch;
                tc.schedule = Schedule::reference().scaled(TrainConfig::reference().steps, steps)?;
            }
            tc.seed = config.seed;
            let recs = load_processed(&data, &config)?;
            let labels: Vec<GestureClass> = recs.iter().map(|r| r.label).collect();
            let (train, val) = split(&labels, val_fraction, config.seed);
            println!("train={} val={}", train.len(), val.len());
            let norm = fit_normalization(&recs, &train, &config)?;
            let resume = resume.map(|p| Checkpoint::load(&p)).transpose()?;
            let log_path = out.with_extension("log");
            let mut log = String::new();
            let (mut ck, summary) =
                train_classifier(&recs, &train, norm, &config, &tc, resume.as_ref(), log_every, |line| {
                    println!("{line}");
                    log.push_str(line);
                    log.push('\n');
                })?;
            if !val.is_empty() {
                let (acc, _) = offline_accuracy(&ck.network, &recs, &val, &ck.normalization, &config)?;
                ck.metadata.insert("val_accuracy".into(), format!("{acc}"));
                let line = format!("val_accuracy={acc:.4}");
                println!("{line}");
                log.push_str(&line);
                log.push('\n');
            }
            ck.save(&out)?;
            std::fs::write(&log_path, log).map_err(|e| Error::io(&log_path, e))?;
            println!("final_loss={:.6}", summary.final_loss);
            println!("checkpoint={}", out.display());
        }
        Command::Stream {
            common,
            recording,
            checkpoint,
            realtime,
        } => {
            let mut config = common.load()?;
            config.realtime |= realtime;
            let model = checkpoint_for(&config, checkpoint)?;
            let file = RecordingFile::read(&recording)?;
            if file.params != config.radar {
                return Err(Error::Format("recording radar parameters differ from the configuration".into()));
            }
            let detection_only = model.is_none();
            let run = run_stream(file.frames, &config, model)?;
            print!("{}", run.event_log(&GestureClass::names()));
            for c in &run.deadline_misses {
                eprintln!("warning: deadline miss at cycle {c}");
            }
            if run.dropped > 0 {
                eprintln!("warning: {} events not classified (queue full)", run.dropped);
            }
            println!("events={}", run.events.len());
            let labels = rgr_core::pipeline::labels_path(&recording);
            if labels.exists() {
                let mut report = EvalReport::new(detection_only);
                score_recording(&mut report, &read_labels(&recording)?, &run.events, config.had.short_window)?;
                report.timings = run.timings;
                report.deadline_misses = run.deadline_misses.len() as u64;
                print!("{}", report.render());
            } else {
                println!("deadline_misses={}", run.deadline_misses.len());
                print!("{}", run.timings.report());
            }
        }
        Command::Eval {
            common,
            data,
            checkpoint,
        } => {
            let config = common.load()?;
            let model = checkpoint_for(&config, checkpoint)?;
            let items = read_dataset(&data)?.into_iter().map(|(p, labels)| {
                let file = RecordingFile::read(&p)?;
                Ok((file.frames, labels))
            });
            let report = evaluate(items, &config, model)?;
            print!("{}", report.render());
        }
        Command::CalibrateHad {
            common,
            data,
            noise_std,
            out,
        } => {
            let mut config = common.load()?;
            let sigma = match (data, noise_std) {
                (Some(dir), _) => median(read_manifest(&dir)?.iter().map(|e| e.noise_std).collect())
                    .ok_or_else(|| Error::NotReady("empty manifest".into()))?,
                (None, Some(s)) => s,
                (None, None) => {
                    return Err(Error::ParameterDomain("calibrate-had needs --data or --noise-std".into()))
                }
            };
            let g = calibrate(&config, sigma, config.seed)?;
            config.had.gamma1 = g;
            println!("noise_std={sigma:e}");
            println!("had.gamma1={g}");
            if let Some(p) = out {
                std::fs::write(&p, config.to_text()).map_err(|e| Error::io(&p, e))?;
                println!("config={}", p.display());
            }
        }
    }
    Ok(())
}
