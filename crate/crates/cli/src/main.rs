use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use atom_core::apps::{self, BulletinBoard, NoiseParams};
use atom_core::crypto::{keygen, KeyPair};
use atom_core::grouping::{failure_log2, required_group_size, Fraction};
use atom_core::protocol::{Outcome, Variant};
use atom_core::rng;
use atom_core::simnet::{self, AdversaryEntry, SimConfig, SimError};
use atom_core::{PrimeGroup, RoundResult, TestGroup, P256};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

const EXIT_DESTROY: u8 = 10;
const EXIT_ABORT: u8 = 11;
const EXIT_UNRECOVERABLE: u8 = 12;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "atom", version, about = "Simulate anonymous messaging rounds over mixing groups")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Smallest group size keeping every group above `h` honest members.
    Groupsize {
        #[arg(long, default_value = "0.2")]
        f: String,
        #[arg(long, default_value_t = 1024)]
        groups: u64,
        #[arg(long, default_value_t = 1)]
        h: u32,
        #[arg(long, default_value_t = -64, allow_hyphen_values = true)]
        eps_log2: i32,
    },
    /// Run one round and write its transcript and metrics.
    Run(RunArgs),
    /// Run the same workload over several group counts.
    Sweep {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
        group_counts: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run identical inputs through both variants and report the latency ratio.
    Compare {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Backend {
    P256,
    Test,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum App {
    Microblog,
    Dial,
}

/// Round parameters. Any key in `--config` overrides the matching flag.
#[derive(Args, Clone)]
struct SpecArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    messages: Option<usize>,
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    f: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    round: Option<u64>,
    #[arg(long)]
    msg_len: Option<usize>,
    #[arg(long)]
    servers: Option<usize>,
    #[arg(long)]
    buddies: Option<usize>,
    /// TOML file with `[[adversary]]` entries.
    #[arg(long)]
    adversary: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "p256")]
    backend: Backend,
    /// Accept a group size below the safe minimum for `f`, `G` and `h`.
    #[arg(long)]
    unsafe_override: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_enum, default_value = "microblog")]
    app: App,
    #[arg(long, default_value_t = 4)]
    mailboxes: u64,
    /// Mean dial dummies per server; 0 disables noise.
    #[arg(long, default_value_t = 0.0)]
    noise_mu: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_b: f64,
    #[arg(long, default_value = "atom-out")]
    out: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AdversaryScript {
    adversary: Vec<AdversaryEntry>,
}

/// A failure the operator can fix by changing inputs.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

impl SpecArgs {
    fn resolve(&self) -> anyhow::Result<SimConfig> {
        let mut table = toml::Table::try_from(SimConfig::default()).context("default config")?;
        let mut set = |key: &str, v: Option<toml::Value>| {
            if let Some(v) = v {
                table.insert(key.into(), v);
            }
        };
        let int = |v: Option<usize>| v.map(|n| toml::Value::Integer(n as i64));
        set("variant", self.variant.map(|v| toml::Value::String(v.to_string())));
        set("messages", int(self.messages));
        set("groups", int(self.groups));
        set("k", int(self.k));
        set("h", int(self.h));
        set("iterations", int(self.iterations));
        set("f", self.f.map(toml::Value::Float));
        set("seed", self.seed.map(|n| toml::Value::Integer(n as i64)));
        set("round", self.round.map(|n| toml::Value::Integer(n as i64)));
        set("msg_len", int(self.msg_len));
        set("servers", int(self.servers));
        set("buddies", int(self.buddies));
        if let Some(path) = &self.config {
            let text = read(path)?;
            let file: toml::Table = text.parse().map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            table.extend(file);
        }
        let mut cfg: SimConfig =
            table.try_into().map_err(|e: toml::de::Error| config_err(format!("config: {}", e.message())))?;
        if let Some(path) = &self.adversary {
            let script: AdversaryScript =
                toml::from_str(&read(path)?).map_err(|e| config_err(format!("{}: {}", path.display(), e.message())))?;
            cfg.adversary = script.adversary;
        }
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        if !self.unsafe_override {
            check_group_size(&cfg)?;
        }
        Ok(cfg)
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

fn check_group_size(cfg: &SimConfig) -> anyhow::Result<()> {
    // the shortest decimal form keeps 0.2 exactly 1/5
    let f: Fraction =
        format!("{}", cfg.f).parse().map_err(|_| config_err(format!("f = {} is not in (0, 1)", cfg.f)))?;
    let need = required_group_size(f, cfg.groups as u64, cfg.h as u32, -64).map_err(|e| config_err(e.to_string()))?;
    if (cfg.k as u32) < need {
        return Err(config_err(format!(
            "k = {} is below the safe size {need} for f = {}, G = {}, h = {} (pass --unsafe-override to run anyway)",
            cfg.k, cfg.f, cfg.groups, cfg.h
        )));
    }
    Ok(())
}

fn exit_code(outcome: &Outcome) -> u8 {
    match outcome {
        Outcome::Delivered | Outcome::Released => 0,
        Outcome::Destroyed { .. } => EXIT_DESTROY,
        Outcome::Aborted { .. } => EXIT_ABORT,
        Outcome::Unrecoverable { .. } => EXIT_UNRECOVERABLE,
    }
}

fn groupsize(f: &str, groups: u64, h: u32, eps: i32) -> anyhow::Result<()> {
    let frac: Fraction = f.parse().map_err(|_| config_err(format!("f = {f} is not a fraction in (0, 1)")))?;
    let k = required_group_size(frac, groups, h, eps).map_err(|e| config_err(e.to_string()))?;
    println!("k = {k}");
    println!("log2 failure at k = {k}: {:.3}", failure_log2(frac, groups, h, k));
    if k > h.max(1) {
        println!("log2 failure at k = {}: {:.3}", k - 1, failure_log2(frac, groups, h, k - 1));
    }
    println!("bound: 2^{eps}");
    Ok(())
}

struct RunReport {
    code: u8,
    summary: String,
}

fn run<G: PrimeGroup>(args: &RunArgs, cfg: SimConfig) -> anyhow::Result<RunReport> {
    let mut cfg = cfg;
    let users: Vec<KeyPair<G>>;
    let messages = match args.app {
        App::Microblog => {
            if cfg.msg_len > apps::MAX_POST {
                return Err(config_err(format!("posts are limited to {} bytes", apps::MAX_POST)));
            }
            users = Vec::new();
            simnet::sample_messages(cfg.messages, cfg.msg_len, cfg.seed)
        }
        App::Dial => {
            cfg.msg_len = apps::dial_len::<G>();
            let mut r = rng::stream(cfg.seed, cfg.round, "cli/dial-users");
            users = (0..cfg.messages).map(|_| keygen(&mut r)).collect();
            (0..cfg.messages)
                .map(|i| apps::dial(&users[i], &users[(i + 1) % users.len()].public, cfg.round, &mut r).0)
                .collect()
        }
    };
    let result: RoundResult<G> = simnet::run_round(cfg.clone(), &messages).map_err(sim_err)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    std::fs::write(args.out.join("transcript.jsonl"), result.transcript.to_jsonl())?;
    let mut records = vec![serde_json::json!({ "record": "metrics", "metrics": result.metrics })];
    let mut summary = format!(
        "variant {} | M {} | G {} | k {} | h {} | T {} | seed {}\noutcome {}\nlatency {:.3} s\nrows {} x {} elements\nbytes {}\nmean idle {:.3} s\n",
        cfg.variant,
        cfg.messages,
        cfg.groups,
        cfg.k,
        cfg.h,
        cfg.iterations,
        cfg.seed,
        result.metrics.outcome,
        result.metrics.latency_s,
        result.metrics.rows,
        result.metrics.row_width,
        result.metrics.bytes,
        result.metrics.mean_idle_s,
    );
    match &result.outcome {
        Outcome::Aborted { abort } => {
            summary += &format!("accused server {} at {:?} in group {}\n", abort.accused, abort.step, abort.gid);
        }
        Outcome::Destroyed { reason } => {
            summary += &format!("destroyed: {reason:?}\nblamed users {:?}\n", result.blamed);
        }
        _ => {}
    }
    if let Ok(board) = BulletinBoard::publish(cfg.round, &result) {
        match args.app {
            App::Microblog => {
                summary += &format!("published {} posts\n", board.len());
                records.push(serde_json::json!({ "record": "board", "posts": board.len() }));
            }
            App::Dial => {
                let mut posts = board.posts.clone();
                let mut r = rng::stream(cfg.seed, cfg.round, "cli/dial-noise");
                let noise = NoiseParams { mu: args.noise_mu, b: args.noise_b };
                let dummies = apps::gen_dial_dummies::<G, _>(noise, cfg.server_count(), args.mailboxes, &mut r)
                    .map_err(|e| config_err(e.to_string()))?;
                posts.extend(dummies.iter().cloned());
                let boxes = apps::deliver(&posts, args.mailboxes).map_err(|e| config_err(e.to_string()))?;
                let connected = users.iter().filter(|u| !apps::open_mailbox(u, &boxes, cfg.round).is_empty()).count();
                summary += &format!(
                    "dials {} | dummies {} | mailboxes {} | recipients reached {connected}\n",
                    board.len(),
                    dummies.len(),
                    args.mailboxes
                );
                records.push(serde_json::json!({
                    "record": "dial", "dials": board.len(), "dummies": dummies.len(), "reached": connected
                }));
            }
        }
    }
    let lines: Vec<String> = records.iter().map(|r| r.to_string()).collect();
    std::fs::write(args.out.join("metrics.jsonl"), lines.join("\n") + "\n")?;
    std::fs::write(args.out.join("summary.txt"), &summary)?;
    Ok(RunReport { code: exit_code(&result.outcome), summary })
}

fn sim_err(e: SimError) -> anyhow::Error {
    match e {
        SimError::Config(m) => config_err(m),
        other => other.into(),
    }
}

fn sweep<G: PrimeGroup>(base: SimConfig, counts: &[usize], out: Option<&Path>) -> anyhow::Result<()> {
    let configs: Vec<SimConfig> = counts
        .iter()
        .map(|&g| {
            let cfg = SimConfig { groups: g, servers: base.servers.map(|_| g.max(base.k)), ..base.clone() };
            cfg.validate().map(|_| cfg).map_err(sim_err)
        })
        .collect::<anyhow::Result<_>>()?;
    let rows = simnet::scaling_sweep::<G>(&configs).map_err(sim_err)?;
    let mut table = String::from("groups  touches  expected  latency_s\n");
    for r in &rows {
        table += &format!("{:>6}  {:>7}  {:>8.1}  {:>9.3}\n", r.groups, r.touches, r.expected, r.latency_s);
    }
    print!("{table}");
    if let Some(path) = out {
        let lines: Vec<String> = rows.iter().map(|r| serde_json::to_string(r).expect("plain struct")).collect();
        std::fs::write(path, lines.join("\n") + "\n")?;
    }
    Ok(())
}

fn compare<G: PrimeGroup>(cfg: SimConfig, out: Option<&Path>) -> anyhow::Result<()> {
    let c = simnet::compare_variants::<G>(&cfg).map_err(sim_err)?;
    println!("nizk {:.3} s ({} rows)", c.nizk_latency_s, c.nizk_rows);
    println!("trap {:.3} s ({} rows)", c.trap_latency_s, c.trap_rows);
    println!("ratio {:.2}", c.ratio);
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string(&c)? + "\n")?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.cmd {
        Cmd::Groupsize { f, groups, h, eps_log2 } => groupsize(&f, groups, h, eps_log2).map(|_| 0),
        Cmd::Run(args) => {
            let cfg = args.spec.resolve()?;
            let report = match args.spec.backend {
                Backend::P256 => run::<P256>(&args, cfg)?,
                Backend::Test => run::<TestGroup>(&args, cfg)?,
            };
            print!("{}", report.summary);
            Ok(report.code)
        }
        Cmd::Sweep { spec, group_counts, out } => {
            let cfg = spec.resolve()?;
            if group_counts.is_empty() {
                bail!(config_err("no group counts given"));
            }
            match spec.backend {
                Backend::P256 => sweep::<P256>(cfg, &group_counts, out.as_deref())?,
                Backend::Test => sweep::<TestGroup>(cfg, &group_counts, out.as_deref())?,
            }
            Ok(0)
        }
        Cmd::Compare { spec, out } => {
            let cfg = spec.resolve()?;
            match spec.backend {
                Backend::P256 => compare::<P256>(cfg, out.as_deref())?,
                Backend::Test => compare::<TestGroup>(cfg, out.as_deref())?,
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
