use std::io::BufReader;
use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Subcommand};
use revtts::perceptual::{
    aggregate_mos, aggregate_preferences, build_session, parse_audio_index, read_journal, JournalRecord,
    MosAggregate, SessionPlan, SessionSpec,
};
use revtts_labserver::{Lab, LabConfig};
use serde::Serialize;

use crate::{usage, Globals};

#[derive(Subcommand, Debug)]
pub enum MosCmd {
    /// Build a seeded session plan from an audio index
    Build(BuildArgs),
    /// Run the listening-test service for a plan
    Serve(ServeArgs),
    /// Tally MOS and paired preferences from a journal
    Aggregate(AggregateArgs),
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// `system|utt_id|path` lines
    #[arg(long)]
    index: PathBuf,
    /// Comma-separated system names; the first two are paired
    #[arg(long, value_delimiter = ',')]
    systems: Vec<String>,
    #[arg(long)]
    items_per_system: Option<usize>,
    #[arg(long)]
    pairs: Option<usize>,
    #[arg(long)]
    session_id: Option<String>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Response journal (created if missing, replayed if present)
    #[arg(long)]
    journal: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Front-end assets to serve at `/`
    #[arg(long)]
    static_dir: Option<PathBuf>,
    /// Require `?key=` on the export endpoint
    #[arg(long)]
    operator_key: Option<String>,
}

#[derive(Args, Debug)]
pub struct AggregateArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    journal: PathBuf,
    /// System whose paired wins are counted (default: the second system)
    #[arg(long)]
    focus: Option<String>,
}

pub fn run(cmd: MosCmd, g: &Globals) -> Result<()> {
    match cmd {
        MosCmd::Build(a) => build(a, g),
        MosCmd::Serve(a) => serve(a),
        MosCmd::Aggregate(a) => aggregate(a, g),
    }
}

fn load_plan(path: &PathBuf) -> Result<SessionPlan> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    SessionPlan::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn build(a: BuildArgs, g: &Globals) -> Result<()> {
    let cfg = &g.config.session;
    let f = std::fs::File::open(&a.index).with_context(|| format!("opening {}", a.index.display()))?;
    let index = parse_audio_index(BufReader::new(f)).with_context(|| format!("parsing {}", a.index.display()))?;
    let systems = if a.systems.is_empty() { cfg.systems.clone() } else { a.systems };
    if systems.is_empty() {
        return Err(usage("mos build needs --systems (or session.systems in the config)"));
    }
    let spec = SessionSpec {
        session_id: a.session_id.unwrap_or_else(|| cfg.session_id.clone()),
        systems,
        items_per_system: a.items_per_system.unwrap_or(cfg.items_per_system),
        pairs: a.pairs.unwrap_or(cfg.pairs),
    };
    let plan = build_session(&spec, &index, g.seed.unwrap_or(cfg.seed))?;
    g.output.emit(&plan)
}

fn serve(a: ServeArgs) -> Result<()> {
    let plan = load_plan(&a.plan)?;
    let lab = Lab::open(
        plan,
        &a.journal,
        LabConfig {
            static_dir: a.static_dir,
            operator_key: a.operator_key,
        },
    )?;
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(revtts_labserver::serve(lab, a.addr))
        .with_context(|| format!("serving on {}", a.addr))
}

#[derive(Serialize)]
struct AggregateOutput {
    wins: usize,
    total: usize,
    percent: f64,
    focus_system: String,
    wins_by_system: std::collections::BTreeMap<String, usize>,
    pairs: Vec<String>,
    raters: Vec<String>,
    matrix: Vec<Vec<Option<u8>>>,
    rejected: Vec<String>,
    mos: MosAggregate,
}

fn aggregate(a: AggregateArgs, g: &Globals) -> Result<()> {
    let plan = load_plan(&a.plan)?;
    let records = read_journal(&a.journal)?;
    let mut mos = Vec::new();
    let mut prefs = Vec::new();
    for r in records {
        match r {
            JournalRecord::Session { session_id, .. } if session_id != plan.session_id => {
                anyhow::bail!("journal is for session {session_id}, plan is {}", plan.session_id)
            }
            JournalRecord::Mos(m) => mos.push(m),
            JournalRecord::Preference(p) => prefs.push(p),
            _ => {}
        }
    }
    let focus = match a.focus {
        Some(f) => f,
        None => plan
            .systems
            .get(1)
            .cloned()
            .ok_or_else(|| usage("plan has a single system; pass --focus"))?,
    };
    let p = aggregate_preferences(&plan.pairs, &prefs, &focus)?;
    g.output.emit(&AggregateOutput {
        wins: p.wins,
        total: p.total,
        percent: p.percent,
        focus_system: p.focus_system,
        wins_by_system: p.wins_by_system,
        pairs: p.pairs,
        raters: p.raters,
        matrix: p.matrix,
        rejected: p.rejected,
        mos: aggregate_mos(&plan, &mos),
    })
}
