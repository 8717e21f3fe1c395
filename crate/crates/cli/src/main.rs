// Copyright 2026 The VAMS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `vams`: one subcommand per role. Invoked as `vams-exp` it runs the
//! experiment harness directly.
//!
//! Exit status: 0 success or accept, 2 rejection or evidence, 1 operational
//! error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "vams", version, about = "Verifiable access-request logging")]
struct Cli {
    /// Log server base URL.
    #[arg(long, global = true, env = "VAMS_SERVER", default_value = "http://127.0.0.1:8420")]
    server: String,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a party key file.
    Keygen(KeygenArgs),
    /// Set up, register agents with, and run a log server.
    #[command(subcommand)]
    Server(ServerCmd),
    /// Log access requests as an agent.
    #[command(subcommand)]
    Agent(AgentCmd),
    /// Fetch logged requests as a data provider.
    #[command(subcommand)]
    Provider(ProviderCmd),
    /// Find your own requests and check published statistics.
    #[command(subcommand)]
    User(UserCmd),
    /// Audit the log and publish statistics.
    #[command(subcommand)]
    Auditor(AuditorCmd),
    /// Answer requests by policy on users' behalf.
    #[command(subcommand)]
    Broker(BrokerCmd),
    /// Save the server's current signed heads, for gossip with `detect`.
    Heads(HeadsArgs),
    /// Compare signed heads from several sources for equivocation.
    Detect(DetectArgs),
    /// Safe element counts for MultiBallot publications.
    Bounds(BoundsArgs),
    /// Percent-error experiments and the throughput benchmark.
    #[command(subcommand)]
    Exp(ExpCmd),
}

#[derive(Args)]
struct KeygenArgs {
    #[arg(long)]
    out: PathBuf,
    /// Overwrite an existing file.
    #[arg(long)]
    force: bool,
    /// Extra entry such as `server-public=<hex>`; repeatable.
    #[arg(long, value_name = "NAME=HEX")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum ServerCmd {
    /// Write a config, head-signing key and empty agent registry into a directory.
    Init {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Add a party's signing key to the registry named by the config.
    Register {
        #[arg(long)]
        config: PathBuf,
        /// agent, broker, auditor or provider.
        #[arg(long)]
        role: String,
        /// Ed25519 public key, hex.
        #[arg(long)]
        key: String,
    },
    /// Serve the HTTP API until killed.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Pair {
    /// Key file of the acting party.
    #[arg(long)]
    keys: PathBuf,
    /// Agent's private identifier for the user.
    #[arg(long)]
    id_a: String,
    /// Data provider's private identifier for the user.
    #[arg(long)]
    id_dp: String,
}

#[derive(Subcommand)]
enum AgentCmd {
    /// Seal, sign and submit a request.
    Request {
        #[command(flatten)]
        pair: Pair,
        /// Session counter; defaults to the next unused one in --counters.
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value = "vams-counters.json")]
        counters: PathBuf,
        #[arg(long)]
        category: String,
        #[arg(long, default_value = "")]
        purpose: String,
        /// User's X25519 public key, hex.
        #[arg(long)]
        user_public: String,
    },
}

#[derive(Subcommand)]
enum ProviderCmd {
    /// Fetch a request by common identifier and verify it is logged.
    Fetch {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        id_c: String,
    },
}

#[derive(Subcommand)]
enum UserCmd {
    /// List and decrypt every logged request for an identifier pair.
    Check {
        #[command(flatten)]
        pair: Pair,
        #[arg(long, default_value_t = 3)]
        lookahead: u64,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
    },
    /// Re-check published statistics against the share dataset.
    Monitor(MonitorArgs),
}

#[derive(Args)]
struct MonitorArgs {
    /// Manifest JSON file.
    #[arg(long, required_unless_present = "log_index")]
    manifest: Option<PathBuf>,
    /// Read the manifest from this request-log index instead (needs --keys).
    #[arg(long)]
    log_index: Option<u64>,
    #[arg(long)]
    keys: Option<PathBuf>,
    /// Share dataset CSV.
    #[arg(long)]
    dpriv: PathBuf,
    /// Record CSV holding the caller's own record.
    #[arg(long, requires = "id_c")]
    record: Option<PathBuf>,
    #[arg(long, requires = "record")]
    id_c: Option<String>,
    /// Allowed share-distribution deviation, as a fraction of all shares.
    #[arg(long, default_value_t = vams::roles::DEFAULT_DISTRIBUTION_TOLERANCE)]
    distribution_tolerance: f64,
}

#[derive(Subcommand)]
enum AuditorCmd {
    /// Replay the log, check every map head and classify new requests.
    Audit {
        #[arg(long)]
        keys: PathBuf,
        /// Start classifying at this log size (ignores the saved cursor).
        #[arg(long)]
        from_size: Option<u64>,
        /// Where the last audited log head is kept between runs.
        #[arg(long)]
        cursor: Option<PathBuf>,
    },
    /// Build D_priv and statistics for a dataset and log the manifest.
    Publish(PublishArgs),
}

#[derive(Args)]
struct PublishArgs {
    #[arg(long)]
    keys: PathBuf,
    /// Record CSV: `id_c,e1,...,et`.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1e-4)]
    threshold: f64,
    /// Shares assumed known to an adversary; worst case over 1..=2k if absent.
    #[arg(long)]
    known: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Seed for share generation, 64 hex digits; random if absent.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Where readers will find the share dataset.
    #[arg(long)]
    dpriv_location: Option<String>,
}

#[derive(Subcommand)]
enum BrokerCmd {
    /// Add a user to the encrypted subscription store.
    Subscribe {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long)]
        id_dp: String,
        #[arg(long)]
        user_public: String,
    },
    /// Answer JSON-lines requests `{user, category, purpose}` by policy.
    Run {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        store: PathBuf,
        /// The broker's own identifier, paired with each user's provider identifier.
        #[arg(long)]
        id_a: String,
        /// Input file; standard input if absent.
        #[arg(long)]
        requests: Option<PathBuf>,
    },
}

#[derive(Args)]
struct HeadsArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Comma-separated head sources: server URLs or saved head files.
    #[arg(long, value_delimiter = ',', required = true)]
    heads: Vec<String>,
    /// Key file holding `server-public`.
    #[arg(long)]
    keys: PathBuf,
    /// Ask --server for consistency proofs between heads of different sizes.
    #[arg(long)]
    consistency: bool,
}

#[derive(Args)]
struct BoundsArgs {
    /// Print the standard table of schemes and population sizes.
    #[arg(long)]
    table2: bool,
    /// Emit CSV instead of text.
    #[arg(long)]
    csv: bool,
    #[arg(long, conflicts_with = "table2")]
    k: Option<usize>,
    #[arg(long, requires = "k")]
    users: Option<u64>,
    #[arg(long, requires = "k")]
    known: Option<usize>,
    #[arg(long, default_value_t = vams::bounds::TABLE2_THRESHOLD)]
    threshold: f64,
}

#[derive(Args, Clone)]
struct ExpCommon {
    #[arg(long, default_value = "results")]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value = "ci")]
    profile: vams::experiments::Profile,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum ExpCmd {
    /// Pair support sweep for k = 1..4.
    Fig6(ExpCommon),
    /// Pair support across record counts.
    Fig7(ExpCommon),
    /// Itemset size sweep.
    Fig8(ExpCommon),
    /// Submission throughput per batch size.
    Bench {
        #[arg(long, default_value = "results")]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,10,50,100,200,300,500,1000")]
        batch_sizes: Vec<usize>,
        #[arg(long, default_value_t = 3000)]
        duration_ms: u64,
        #[arg(long, default_value_t = 4)]
        clients: usize,
        /// Keep stores in memory instead of on disk.
        #[arg(long)]
        in_memory: bool,
    },
}

#[derive(Parser)]
#[command(name = "vams-exp", version, about = "Percent-error experiments and the throughput benchmark")]
struct ExpCli {
    #[arg(short, long)]
    verbose: bool,
    #[command(subcommand)]
    command: ExpCmd,
}

/// How a successful run ended.
pub enum Outcome {
    Accept,
    Reject,
}

fn init_logging(verbose: bool) {
    let level = if verbose { tracing::Level::DEBUG } else { tracing::Level::WARN };
    let _ = tracing_subscriber::fmt().with_max_level(level).with_writer(std::io::stderr).try_init();
}

/// The error and any causes its own message does not already include.
fn describe(e: &anyhow::Error) -> String {
    let mut out = e.to_string();
    for cause in e.chain().skip(1) {
        let c = cause.to_string();
        if !out.contains(&c) {
            out = format!("{out}: {c}");
        }
    }
    out
}

fn main() -> ExitCode {
    let invoked_as = std::env::args_os()
        .next()
        .and_then(|a| PathBuf::from(a).file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_default();
    let result = if invoked_as == "vams-exp" {
        let cli = ExpCli::parse();
        init_logging(cli.verbose);
        commands::exp(cli.command)
    } else {
        let cli = Cli::parse();
        init_logging(cli.verbose);
        commands::dispatch(&cli.server, cli.command)
    };
    match result {
        Ok(Outcome::Accept) => ExitCode::SUCCESS,
        Ok(Outcome::Reject) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            let rejected = e.downcast_ref::<vams::roles::RoleError>().is_some_and(|r| r.is_rejection());
            ExitCode::from(if rejected { 2 } else { 1 })
        }
    }
}
