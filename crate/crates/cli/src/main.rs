//! `krds`: train, evaluate and serve KR-DQN diagnosis agents.

use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use krds_client::{Client, ClientError};
use krds_core::bundle::{load_bundle, save_bundle, to_json};
use krds_core::dialogue::AgentAction;
use krds_core::harness::run_ablation;
use krds_core::language::{LanguageLayer, LexiconFile, TemplateSet};
use krds_core::metrics::fingerprint;
use krds_core::ontology::{load_goal_file, Dataset, Ontology};
use krds_core::policy::{Ablation, Policy, RelationInit};
use krds_core::session::{DiagnosisAgent, SessionStatus};
use krds_core::simulator::RewardScheme;
use krds_core::synthetic::{generate, SyntheticConfig};
use krds_core::trainer::{evaluate, init_policy, train, DialogueMode, ErrorModel, TrainerConfig};
use krds_server::{AppState, SessionStore};

#[derive(Parser)]
#[command(
    name = "krds",
    version,
    about = "Knowledge-routed DQN for diagnosis dialogues"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy and write a bundle plus a JSON-lines report.
    Train(TrainArgs),
    /// Score a bundle on a goal split and print a metrics report.
    Evaluate(EvaluateArgs),
    /// Train every ablation variant and print a comparison table.
    Ablate(AblateArgs),
    /// Talk to an agent in the terminal.
    Chat(ChatArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Describe a bundle or dataset.
    Inspect(InspectArgs),
    /// Write a generated goal file.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Goal file; the generated corpus when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
}

impl DataArgs {
    fn load(&self) -> Result<(Ontology, Dataset)> {
        match &self.data {
            Some(p) => load_goal_file(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(generate(&SyntheticConfig::default())?),
        }
    }
}

#[derive(Args, Clone)]
struct LanguageArgs {
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    templates: Option<PathBuf>,
}

impl LanguageArgs {
    fn layer(&self, ontology: &Ontology) -> Result<LanguageLayer> {
        let lexicon = match &self.lexicon {
            Some(p) => LexiconFile::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => LexiconFile::demo_for(ontology),
        };
        let templates = match &self.templates {
            Some(p) => TemplateSet::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => TemplateSet::demo(),
        };
        Ok(LanguageLayer::new(ontology, &lexicon, templates)?)
    }
}

#[derive(Args, Clone)]
struct SimArgs {
    /// Preset: main, R1, R2, R1*, R2*.
    #[arg(long, conflicts_with = "reward")]
    reward_scheme: Option<String>,
    /// Custom triple `success,failure,penalty`.
    #[arg(long, allow_hyphen_values = true)]
    reward: Option<String>,
    #[arg(long, default_value = "frame", value_parser = ["frame", "language"])]
    mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Slot and intent corruption rate of the simulated user.
    #[arg(long, default_value_t = 0.05)]
    error_rate: f64,
    #[command(flatten)]
    language: LanguageArgs,
}

impl SimArgs {
    fn apply(&self, config: &mut TrainerConfig) -> Result<()> {
        if let Some(name) = &self.reward_scheme {
            config.reward = RewardScheme::preset(name)
                .with_context(|| format!("unknown reward scheme {name:?}"))?;
        }
        if let Some(triple) = &self.reward {
            config.reward = RewardScheme::parse(triple)?;
        }
        config.mode = DialogueMode::parse(&self.mode).expect("clap checked the mode");
        config.seed = self.seed;
        config.error_model = ErrorModel::new(self.error_rate, self.error_rate)?;
        Ok(())
    }

    fn language_for(&self, ontology: &Ontology) -> Result<Option<LanguageLayer>> {
        match self.mode.as_str() {
            "language" => Ok(Some(self.language.layer(ontology)?)),
            _ => Ok(None),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value = "full", value_parser = ["basic", "relation", "knowledge", "full"])]
    ablation: String,
    #[arg(long, default_value = "prior", value_parser = ["prior", "random"])]
    relation_init: String,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    sims_per_epoch: usize,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    eval_episodes: u64,
    #[arg(long, default_value_t = 512)]
    hidden: usize,
    /// Output bundle; `.bin` selects the binary encoding.
    #[arg(long, default_value = "model.json")]
    bundle: PathBuf,
    #[arg(long, default_value = "report.jsonl")]
    report: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    episodes: u64,
    #[arg(long, default_value = "test", value_parser = ["train", "test"])]
    split: String,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 512)]
    hidden: usize,
    /// Also write every row as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[command(flatten)]
    language: LanguageArgs,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Append-only session log, replayed on start.
    #[arg(long)]
    sessions: Option<PathBuf>,
}

#[derive(Args)]
struct ChatArgs {
    /// Running service to talk to.
    #[arg(long, conflicts_with = "bundle")]
    url: Option<String>,
    /// Bundle to serve on a private local port for this chat.
    #[arg(long, required_unless_present = "url")]
    bundle: Option<PathBuf>,
    #[command(flatten)]
    language: LanguageArgs,
}

#[derive(Args)]
struct InspectArgs {
    /// Print the action table as TSV: index, kind, identifier.
    #[arg(long)]
    actions: bool,
    #[arg(long, conflicts_with = "data")]
    bundle: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "goals.json")]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    diseases: usize,
    #[arg(long, default_value_t = 3)]
    symptoms_per_disease: usize,
    #[arg(long, default_value_t = 200)]
    train_goals: usize,
    #[arg(long, default_value_t = 200)]
    test_goals: usize,
    #[arg(long, default_value_t = 1.0)]
    p_present: f64,
    #[arg(long, default_value_t = 0.3)]
    p_explicit: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

/// Writes to stdout; a closed pipe (`krds ... | head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let (o, data) = args.data.load()?;
    let mut config = TrainerConfig {
        epochs: args.epochs,
        sims_per_epoch: args.sims_per_epoch,
        eval_episodes: args.eval_episodes as usize,
        ..TrainerConfig::default()
    };
    args.sim.apply(&mut config)?;
    config.policy.hidden = args.hidden;
    config.policy.flags = Ablation::parse(&args.ablation)
        .expect("clap checked the ablation")
        .flags();
    config.policy.relation_init =
        RelationInit::parse(&args.relation_init).expect("clap checked the init");
    let language = args.sim.language_for(&o)?;
    let env = config.environment(&o, language.as_ref())?;
    let policy = init_policy(&config, &o, &data.train)?;

    let mut report = std::fs::File::create(&args.report)
        .with_context(|| format!("creating {}", args.report.display()))?;
    let mut write_err = None;
    let outcome = train(&config, &data.train, policy, &env, &mut |r| {
        let line = serde_json::to_string(r).expect("record serializes");
        if let Err(e) = writeln!(report, "{line}") {
            write_err.get_or_insert(e);
        }
        if r.flushed || r.epoch % 25 == 0 {
            eprintln!(
                "epoch {:>4}  success {:.3}  turns {:.2}  loss {:.4}{}",
                r.epoch,
                r.eval_success,
                r.avg_turns,
                r.loss_mean,
                if r.flushed { "  best" } else { "" }
            );
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).with_context(|| format!("writing {}", args.report.display()));
    }
    save_bundle(outcome.best_or_last(), &args.bundle)?;
    let summary = serde_json::json!({
        "bundle": args.bundle,
        "report": args.report,
        "best_eval_success": outcome.report.best_success(),
        "config_fingerprint": config.fingerprint(),
    });
    emit(&format!("{summary}\n"))
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let (o, data) = args.data.load()?;
    let policy =
        load_bundle(&args.bundle).with_context(|| format!("loading {}", args.bundle.display()))?;
    if policy.ontology() != &o {
        bail!(
            "bundle {} was trained on a different ontology",
            args.bundle.display()
        );
    }
    let mut config = TrainerConfig {
        max_turns: policy.max_turns(),
        ..TrainerConfig::default()
    };
    args.sim.apply(&mut config)?;
    let language = args.sim.language_for(&o)?;
    let env = config.environment(&o, language.as_ref())?;
    let goals = if args.split == "train" {
        &data.train
    } else {
        &data.test
    };
    let fp = fingerprint(&serde_json::json!({
        "bundle": fingerprint(&to_json(&policy)),
        "split": args.split,
        "episodes": args.episodes,
        "seed": config.seed,
        "reward": config.reward,
        "mode": config.mode,
        "error_model": config.error_model,
    }));
    let report = evaluate(
        &policy,
        goals,
        args.episodes as usize,
        &env,
        config.seed,
        &fp,
    )?;
    emit(&(serde_json::to_string_pretty(&report)? + "\n"))
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let (o, data) = args.data.load()?;
    let mut config = TrainerConfig {
        epochs: args.epochs,
        ..TrainerConfig::default()
    };
    args.sim.apply(&mut config)?;
    config.policy.hidden = args.hidden;
    let language = args.sim.language_for(&o)?;
    let report = run_ablation(
        &config,
        &o,
        &data,
        &args.seeds,
        language.as_ref(),
        &mut |row| {
            eprintln!(
                "{} seed {}: accuracy {:.3}",
                row.variant, row.seed, row.test.accuracy
            );
        },
    )?;
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&report)?)
            .with_context(|| format!("writing {}", out.display()))?;
    }
    emit(&report.table(&o))
}

fn agent_for(bundle: &Path, language: &LanguageArgs) -> Result<DiagnosisAgent> {
    let policy: Policy =
        load_bundle(bundle).with_context(|| format!("loading {}", bundle.display()))?;
    let layer = language.layer(policy.ontology())?;
    Ok(DiagnosisAgent::new(policy, layer)?)
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?)
}

fn cmd_serve(args: ServeArgs) -> Result<()> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .init();
    let agent = agent_for(&args.bundle, &args.language)?;
    let store = match &args.sessions {
        Some(p) => SessionStore::persistent(p)?,
        None => SessionStore::in_memory(),
    };
    let state = Arc::new(AppState { agent, store });
    runtime()?.block_on(async {
        let (addr, server) =
            krds_server::bind(SocketAddr::new(args.host, args.port), state).await?;
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        server.await?;
        Ok(())
    })
}

async fn converse(client: &Client) -> Result<()> {
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    let mut prompt = |text: &str| -> Result<Option<String>> {
        print!("{text}");
        std::io::stdout().flush()?;
        Ok(lines.next().transpose()?)
    };
    let session = loop {
        let Some(report) = prompt("you> ")? else {
            return Ok(());
        };
        match client.create_session(&report).await {
            Ok(s) => break s,
            Err(ClientError::Api { body, .. }) => println!("({})", body.message),
            Err(e) => return Err(e.into()),
        }
    };
    println!("agent> {}", session.agent_utterance);
    let mut status = session.status;
    let mut diagnosis = session.diagnosis;
    while status == SessionStatus::Open {
        let Some(text) = prompt("you> ")? else {
            return Ok(());
        };
        match client.send_message(&session.id, &text).await {
            Ok(reply) => {
                println!("agent> {}", reply.agent_utterance);
                status = reply.status;
                diagnosis = reply.diagnosis;
            }
            Err(ClientError::Api { body, .. }) => println!("({})", body.message),
            Err(e) => return Err(e.into()),
        }
    }
    match diagnosis {
        Some(d) => println!("session {}: diagnosis {d}", session.id),
        None => println!("session {}: ended without a diagnosis", session.id),
    }
    Ok(())
}

fn cmd_chat(args: ChatArgs) -> Result<()> {
    runtime()?.block_on(async {
        let url = match (&args.url, &args.bundle) {
            (Some(url), _) => url.clone(),
            (None, Some(bundle)) => {
                let agent = agent_for(bundle, &args.language)?;
                let state = Arc::new(AppState {
                    agent,
                    store: SessionStore::in_memory(),
                });
                let (addr, server) =
                    krds_server::bind(SocketAddr::from(([127, 0, 0, 1], 0)), state).await?;
                tokio::spawn(server);
                format!("http://{addr}")
            }
            (None, None) => bail!("chat needs --url or --bundle"),
        };
        converse(&Client::new(url)).await
    })
}

fn cmd_inspect(args: InspectArgs) -> Result<()> {
    let (o, summary) = match &args.bundle {
        Some(p) => {
            let policy = load_bundle(p).with_context(|| format!("loading {}", p.display()))?;
            let summary = serde_json::json!({
                "ontology_hash": policy.ontology().hash(),
                "state_dim": policy.state_dim(),
                "hidden": policy.params().hidden(),
                "actions": policy.action_count(),
                "max_turns": policy.max_turns(),
                "flags": policy.flags(),
            });
            (policy.ontology().clone(), summary)
        }
        None => {
            let (o, data) = args.data.load()?;
            let summary = serde_json::json!({
                "ontology_hash": o.hash(),
                "diseases": o.num_diseases(),
                "symptoms": o.num_symptoms(),
                "actions": o.action_count(),
                "train_goals": data.train.len(),
                "test_goals": data.test.len(),
            });
            (o, summary)
        }
    };
    if args.actions {
        let mut table = String::from("index\tkind\tidentifier\n");
        for i in 0..o.action_count() {
            let a = AgentAction::from_index(i, &o).expect("index in range");
            table.push_str(&format!(
                "{i}\t{}\t{}\n",
                a.kind(&o).as_str(),
                a.identifier(&o)
            ));
        }
        emit(&table)
    } else {
        emit(&(serde_json::to_string_pretty(&summary)? + "\n"))
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let config = SyntheticConfig {
        diseases: args.diseases,
        symptoms_per_disease: args.symptoms_per_disease,
        train_goals: args.train_goals,
        test_goals: args.test_goals,
        p_present: args.p_present,
        p_explicit: args.p_explicit,
        seed: args.seed,
    };
    let (o, data) = generate(&config)?;
    data.save(&args.out, &o)?;
    emit(&format!(
        "wrote {} ({} train, {} test goals)\n",
        args.out.display(),
        data.train.len(),
        data.test.len()
    ))
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Chat(a) => cmd_chat(a),
        Command::Serve(a) => cmd_serve(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Synth(a) => cmd_synth(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
