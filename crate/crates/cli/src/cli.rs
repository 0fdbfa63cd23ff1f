use std::fs;
use std::io::{self, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use compound_bo::campaign::{simulate, write_plot_csv, CampaignConfig, ExperimentResult, Strategy};
use compound_bo::diagnostics::{compare_runs, diagnose_campaign};
use compound_bo::experiment::{read_experiments_csv, write_experiments_csv};
use compound_bo::gp::FitOptions;
use compound_bo::mixture::{DomainSpec, FeatureMap};
use compound_bo::oracle::{build_data_oracle, Oracle, OracleSpec, ValidationMethod};
use serde::Serialize;

use crate::error::ApiError;
use crate::server::{serve, AppState};
use crate::store::{id_from_label, write_log, Store};

#[derive(Debug, Parser)]
#[command(name = "compound-bo", version, about = "Constrained batch optimization campaigns for polymer compounds")]
pub struct Cli {
    /// Directory holding campaign event logs.
    #[arg(long, env = "COMPOUND_BO_STATE_DIR", default_value = "campaigns", global = true)]
    pub state_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FeatureChoice {
    Plain,
    Augmented,
}

impl FeatureChoice {
    fn map(self) -> FeatureMap {
        match self {
            FeatureChoice::Plain => FeatureMap::Plain4d,
            FeatureChoice::Augmented => FeatureMap::augmented_default(),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodChoice {
    Holdout,
    Loo,
}

/// `CAMPAIGN` arguments take a campaign id in the state directory or a path
/// to an event log.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a campaign from a JSON config file.
    Init {
        config: PathBuf,
        /// Defaults to the config label.
        #[arg(long)]
        id: Option<String>,
    },
    /// Propose the next batch and print it as CSV.
    Propose {
        campaign: String,
        #[arg(long)]
        request_id: Option<String>,
    },
    /// Record measured results for the open batch from an experiments CSV
    /// (`-` reads stdin). Rows without metrics are ignored.
    Record {
        campaign: String,
        results: PathBuf,
        #[arg(long)]
        request_id: Option<String>,
    },
    /// Run a whole campaign against an oracle and print its summary.
    Simulate {
        #[arg(long, value_parser = parse_strategy)]
        strategy: Option<Strategy>,
        #[arg(long)]
        seed: Option<u64>,
        /// Oracle spec as inline JSON or a path to a JSON file.
        #[arg(long)]
        oracle: Option<String>,
        /// Base campaign config; flags override its strategy and seed.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        features: Option<FeatureChoice>,
        /// Event log destination; defaults to `<state-dir>/<label>.jsonl`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit per-metric models to an experiments CSV and print the
    /// validation report.
    Validate {
        data: PathBuf,
        #[arg(long, value_enum, default_value = "holdout")]
        method: MethodChoice,
        #[arg(long, default_value_t = 0.85)]
        train_fraction: f64,
        #[arg(long, value_enum, default_value = "plain")]
        features: FeatureChoice,
        #[arg(long, value_delimiter = ',', num_args = 4)]
        upper_bounds: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the diagnostics report of a campaign.
    Diagnose {
        campaign: String,
        /// Also refit models on a holdout split and report RMSEs.
        #[arg(long)]
        validate: bool,
    },
    /// Compare campaigns side by side.
    Compare {
        #[arg(required = true)]
        campaigns: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Print the campaign summary as JSON.
    Summary { campaign: String },
    /// Write per-experiment metric traces with threshold columns as CSV.
    ExportPlotData {
        campaign: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = "COMPOUND_BO_TOKEN", hide_env_values = true)]
        token: Option<String>,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse().map_err(|e: compound_bo::campaign::CampaignError| e.to_string())
}

fn read_file(path: &Path) -> Result<String, ApiError> {
    fs::read_to_string(path).map_err(|e| {
        let msg = format!("{}: {e}", path.display());
        if e.kind() == io::ErrorKind::NotFound {
            ApiError::not_found(msg)
        } else {
            ApiError::internal(msg)
        }
    })
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("plain data") + "\n"
}

/// Inline JSON when the argument starts with `{`, otherwise a file whose
/// directory resolves relative dataset paths.
fn load_oracle(arg: &str) -> Result<Oracle, ApiError> {
    let (spec, base) = if arg.trim_start().starts_with('{') {
        (serde_json::from_str::<OracleSpec>(arg)?, PathBuf::from("."))
    } else {
        let path = Path::new(arg);
        let spec = serde_json::from_str(&read_file(path)?)?;
        (spec, path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf))
    };
    Ok(Oracle::from_spec(spec, &base)?)
}

/// Runs one command, writing normal output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), ApiError> {
    let store = Store::new(&cli.state_dir);
    let write = |out: &mut dyn Write, s: &[u8]| out.write_all(s).map_err(|e| ApiError::internal(format!("stdout: {e}")));
    match cli.command {
        Command::Init { config, id } => {
            let config: CampaignConfig = serde_json::from_str(&read_file(&config)?)?;
            let id = id.unwrap_or_else(|| id_from_label(&config.label()));
            store.create(&id, config)?;
            let path = store.log_path(&id)?;
            write(out, pretty(&serde_json::json!({ "id": id, "log": path })).as_bytes())
        }
        Command::Propose { campaign, request_id } => {
            let (batch, _) = store.mutate(&campaign, |c| c.propose(request_id.as_deref()))?;
            let mut buf = Vec::new();
            write_experiments_csv(&mut buf, &batch)?;
            write(out, &buf)
        }
        Command::Record {
            campaign,
            results,
            request_id,
        } => {
            let text = if results.as_os_str() == "-" {
                let mut s = String::new();
                io::stdin()
                    .read_to_string(&mut s)
                    .map_err(|e| ApiError::internal(format!("stdin: {e}")))?;
                s
            } else {
                read_file(&results)?
            };
            let rows: Vec<ExperimentResult> = read_experiments_csv(text.as_bytes())?
                .into_iter()
                .filter_map(|e| e.measured.map(|metrics| ExperimentResult { id: e.id, metrics }))
                .collect();
            let ((), c) = store.mutate(&campaign, |c| c.record(rows, request_id.as_deref()))?;
            let s = c.state();
            let status = serde_json::json!({ "status": s.status, "batch_index": s.batch_index });
            write(out, pretty(&status).as_bytes())
        }
        Command::Simulate {
            strategy,
            seed,
            oracle,
            config,
            features,
            out: log_out,
        } => {
            let mut cfg = match (config, strategy) {
                (Some(path), _) => serde_json::from_str::<CampaignConfig>(&read_file(&path)?)?,
                (None, Some(s)) => CampaignConfig::new(s, 0),
                (None, None) => return Err(ApiError::invalid("simulate needs --strategy or --config")),
            };
            if let Some(s) = strategy {
                cfg.strategy = s;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(f) = features {
                cfg.feature_map = Some(f.map());
            }
            let oracle = match (&oracle, &cfg.oracle) {
                (Some(arg), _) => load_oracle(arg)?,
                (None, Some(spec)) => Oracle::from_spec(spec.clone(), Path::new("."))?,
                (None, None) => Oracle::synthetic_default(),
            };
            cfg.oracle = Some(oracle.spec().clone());
            let (campaign, err) = simulate(cfg, &oracle)?;
            let path = match log_out {
                Some(p) => p,
                None => store.log_path(&id_from_label(&campaign.config().label()))?,
            };
            write_log(&path, campaign.events())?;
            write(out, pretty(&campaign.summary()).as_bytes())?;
            match err {
                Some(e) => Err(e.into()),
                None => Ok(()),
            }
        }
        Command::Validate {
            data,
            method,
            train_fraction,
            features,
            upper_bounds,
            seed,
        } => {
            let rows = read_experiments_csv(read_file(&data)?.as_bytes())?;
            let bounds = match upper_bounds {
                Some(v) => [v[0], v[1], v[2], v[3]],
                None => DomainSpec::DEFAULT_UPPER_BOUNDS,
            };
            let domain = DomainSpec::new(bounds, features.map()).map_err(|e| ApiError::invalid(e.to_string()))?;
            let method = match method {
                MethodChoice::Holdout => ValidationMethod::Holdout { train_fraction },
                MethodChoice::Loo => ValidationMethod::Loo,
            };
            let fit = FitOptions {
                seed,
                ..FitOptions::default()
            };
            let (_, report) = build_data_oracle(&rows, &domain, method, &fit, seed)?;
            write(out, pretty(&report).as_bytes())
        }
        Command::Diagnose { campaign, validate } => {
            let c = store.load(&campaign)?;
            write(out, pretty(&diagnose_campaign(c.state(), validate)).as_bytes())
        }
        Command::Compare { campaigns, json } => {
            let summaries = campaigns
                .iter()
                .map(|r| store.load(r).map(|c| c.summary()))
                .collect::<Result<Vec<_>, _>>()?;
            let cmp = compare_runs(&summaries);
            let text = if json { pretty(&cmp) } else { cmp.to_table() };
            write(out, text.as_bytes())
        }
        Command::Summary { campaign } => write(out, pretty(&store.load(&campaign)?.summary()).as_bytes()),
        Command::ExportPlotData { campaign, out: dest } => {
            let c = store.load(&campaign)?;
            let mut buf = Vec::new();
            write_plot_csv(&mut buf, c.state())?;
            match dest {
                Some(p) => fs::write(&p, buf).map_err(|e| ApiError::internal(format!("{}: {e}", p.display()))),
                None => write(out, &buf),
            }
        }
        Command::Serve { listen, token } => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| ApiError::internal(format!("runtime: {e}")))?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(listen)
                    .await
                    .map_err(|e| ApiError::internal(format!("bind {listen}: {e}")))?;
                log::info!("listening on {listen}, state in {}", store.root().display());
                serve(listener, AppState::new(store, token))
                    .await
                    .map_err(|e| ApiError::internal(format!("server: {e}")))
            })
        }
    }
}
