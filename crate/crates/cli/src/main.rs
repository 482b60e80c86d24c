use std::io::{self, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use denorm_core::workspace::METADATA_FILE;
use denorm_core::{
    catalog_from_schema, infer_links_by_name, load_catalog_file, save_catalog, save_catalog_file,
    Catalog, ColumnClass, ColumnRef, Dataset, Error, Filter, IngestOptions, JoinType, LinkDraft,
    QueryOutcome, QueryRequest, ResolutionPolicy, SqliteIntrospector, Value, Workspace,
    WorkspacePaths,
};
use denorm_service::{PlanRequest, ServiceConfig};

#[derive(Parser)]
#[command(
    name = "denorm",
    version,
    about = "Plan and run joins across a normalized schema"
)]
struct Cli {
    #[command(flatten)]
    config: Config,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Config {
    /// Directory of CSV files, one table per file.
    #[arg(long, global = true, env = "DENORM_DATA")]
    data: Option<PathBuf>,
    /// Metadata JSON (defaults to links.json in the data directory).
    #[arg(long, global = true, env = "DENORM_METADATA")]
    metadata: Option<PathBuf>,
    /// Table alias map (defaults to aliases.json in the data directory).
    #[arg(long, global = true, env = "DENORM_ALIASES")]
    aliases: Option<PathBuf>,
    /// Longest path, in joins, considered between two tables.
    #[arg(long, global = true, env = "DENORM_MAX_DEPTH")]
    max_depth: Option<usize>,
    /// Path combinations examined per origin table.
    #[arg(long, global = true, env = "DENORM_COMBINATION_CAP")]
    combination_cap: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Load a CSV directory and report tables, types and column classes.
    Ingest {
        dir: PathBuf,
        /// Write the classified catalog skeleton (no links) here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the loaded data as a SQLite database file.
        #[arg(long)]
        sqlite: Option<PathBuf>,
        /// Print the skeleton as metadata JSON.
        #[arg(long)]
        json: bool,
        /// Declare the metadata's links as foreign keys in the loaded tables.
        #[arg(long)]
        declare: bool,
    },
    /// Discover and curate links.
    Links {
        #[command(subcommand)]
        command: LinksCommand,
    },
    /// Inspect the join graph.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Find the minimal join sequences covering the given tables.
    Plan {
        /// Comma-separated table names or aliases.
        tables: String,
        #[arg(long)]
        json: bool,
    },
    /// Plan, emit SQL and run it for the given columns.
    Query {
        /// Comma-separated `table.column` list; `table.*` selects every column.
        columns: String,
        /// `table.column=value`; also `<>`, `<`, `<=`, `>`, `>=`. Repeatable.
        #[arg(long = "filter")]
        filters: Vec<String>,
        /// Extra tables to include, comma-separated.
        #[arg(long)]
        tables: Option<String>,
        /// all, union-distinct, most-rows or prefer-mandatory.
        #[arg(long, env = "DENORM_POLICY", default_value = "all")]
        policy: ResolutionPolicy,
        #[arg(long, value_enum, default_value_t = JoinKind::Inner)]
        join_type: JoinKind,
        #[arg(long, value_enum, env = "DENORM_FORMAT", default_value_t = Format::Table)]
        format: Format,
        /// Rows printed per result.
        #[arg(long)]
        limit: Option<usize>,
        /// Print the SQL before the rows.
        #[arg(long)]
        sql: bool,
    },
    /// Serve the HTTP API (and a built UI, if given).
    Serve {
        #[arg(long, env = "DENORM_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "DENORM_HOST", default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        host: IpAddr,
        /// Directory of static UI assets.
        #[arg(long, env = "DENORM_STATIC_DIR")]
        static_dir: Option<PathBuf>,
        /// Allowed browser origin for development; repeatable, `*` for any.
        #[arg(long = "cors-origin")]
        cors_origins: Vec<String>,
        /// Per-request planning timeout in seconds.
        #[arg(long, default_value_t = 10)]
        timeout_secs: u64,
    },
}

#[derive(Subcommand)]
enum LinksCommand {
    /// Propose links between columns that share a name, classed by scanning the data.
    Infer {
        /// Add the connectable proposals to the metadata file.
        #[arg(long)]
        accept_inferred: bool,
        /// Write the updated metadata here instead of the metadata path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Read foreign keys declared in a SQLite database.
    ImportFk {
        #[arg(long)]
        db: PathBuf,
        /// Write a catalog of the database's tables and imported links here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GraphCommand {
    Show {
        /// Graphviz output.
        #[arg(long, conflicts_with = "json")]
        dot: bool,
        #[arg(long)]
        json: bool,
        /// Restrict to these link ids, comma-separated.
        #[arg(long)]
        links: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum JoinKind {
    Inner,
    Left,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

enum Failure {
    Usage(String),
    Infeasible(String),
    Engine(Error),
    Io(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoJoinPath(_) => Failure::Infeasible(e.to_string()),
            e => Failure::Engine(e),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Infeasible(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(Failure::Engine(e)) if e.is_request_error() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Engine(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let config = cli.config;
    match cli.command {
        Command::Ingest {
            dir,
            out,
            sqlite,
            json,
            declare,
        } => {
            let declared = if declare {
                let path = config
                    .metadata
                    .clone()
                    .unwrap_or_else(|| dir.join(METADATA_FILE));
                Some(load_catalog_file(&path)?)
            } else {
                None
            };
            ingest(&dir, declared.as_ref(), out, sqlite, json)
        }
        Command::Links { command } => match command {
            LinksCommand::Infer {
                accept_inferred,
                out,
            } => links_infer(&config, accept_inferred, out),
            LinksCommand::ImportFk { db, out } => links_import(&db, out),
        },
        Command::Graph {
            command: GraphCommand::Show { dot, json, links },
        } => graph_show(&open(&config)?, dot, json, links),
        Command::Plan { tables, json } => plan(&open(&config)?, &tables, json),
        Command::Query {
            columns,
            filters,
            tables,
            policy,
            join_type,
            format,
            limit,
            sql,
        } => {
            let request = QueryRequest {
                targets: tables.as_deref().map(split_list).unwrap_or_default(),
                select: split_list(&columns)
                    .iter()
                    .map(|c| c.parse::<ColumnRef>())
                    .collect::<Result<_, _>>()?,
                filters: filters
                    .iter()
                    .map(|f| Filter::parse(f))
                    .collect::<Result<_, _>>()?,
                policy,
                join_type: match join_type {
                    JoinKind::Inner => JoinType::Inner,
                    JoinKind::Left => JoinType::Left,
                },
                max_depth: None,
                limit,
            };
            let ws = open(&config)?;
            let outcome = ws.query(&request, None)?;
            print_query(&outcome, format, sql)
        }
        Command::Serve {
            port,
            host,
            static_dir,
            cors_origins,
            timeout_secs,
        } => {
            let workspace = if config.data.is_some() || config.metadata.is_some() {
                Some(Arc::new(open(&config)?))
            } else {
                None
            };
            let service = ServiceConfig {
                request_timeout: Duration::from_secs(timeout_secs),
                cors_origins,
                static_dir,
            };
            serve(workspace, &service, SocketAddr::new(host, port))
        }
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

fn paths(config: &Config) -> Result<WorkspacePaths, Failure> {
    if let Some(d) = &config.data {
        if !d.is_dir() {
            return Err(Failure::Usage(format!(
                "data directory {} does not exist",
                d.display()
            )));
        }
    }
    if let Some(m) = &config.metadata {
        if !m.is_file() {
            return Err(Failure::Usage(format!(
                "metadata file {} does not exist",
                m.display()
            )));
        }
    }
    if config.data.is_none() && config.metadata.is_none() {
        return Err(Failure::Usage(
            "set --data or --metadata (or DENORM_DATA / DENORM_METADATA)".into(),
        ));
    }
    Ok(WorkspacePaths {
        data_dir: config.data.clone(),
        metadata: config.metadata.clone(),
        aliases: config.aliases.clone(),
    })
}

fn open(config: &Config) -> Result<Workspace, Failure> {
    let mut ws = Workspace::open(&paths(config)?)?;
    if let Some(d) = config.max_depth {
        ws.max_depth = d;
    }
    if let Some(c) = config.combination_cap {
        ws.combination_cap = c;
    }
    Ok(ws)
}

fn ingest(
    dir: &Path,
    declare: Option<&Catalog>,
    out: Option<PathBuf>,
    sqlite: Option<PathBuf>,
    json: bool,
) -> Outcome {
    let (dataset, skeleton) = Dataset::ingest_csv_dir_with(dir, &IngestOptions { declare })?;
    let (catalog, reports) = dataset.classify(&skeleton)?;
    let mut stdout = io::stdout().lock();
    if json {
        stdout.write_all(save_catalog(&catalog).as_bytes())?;
    } else {
        for t in dataset.tables() {
            writeln!(stdout, "{} ({} rows)", t.name, t.row_count)?;
            for c in &t.columns {
                let class = reports
                    .iter()
                    .find(|r| r.column.table == t.name && *r.column.column == *c.name)
                    .map(|r| match r.inferred_class {
                        ColumnClass::One => "one",
                        ColumnClass::Many => "many",
                    })
                    .unwrap_or("-");
                writeln!(
                    stdout,
                    "  {:<24} {:<8} {class}",
                    c.name,
                    format!("{:?}", c.ty).to_lowercase()
                )?;
            }
        }
        writeln!(stdout, "{} tables", dataset.tables().len())?;
    }
    if let Some(path) = out {
        save_catalog_file(&catalog, &path)?;
        eprintln!("wrote {}", path.display());
    }
    if let Some(path) = sqlite {
        dataset.export_sqlite(&path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn links_infer(config: &Config, accept: bool, out: Option<PathBuf>) -> Outcome {
    if config.data.is_none() {
        return Err(Failure::Usage("links infer scans data; set --data".into()));
    }
    let ws = open(config)?;
    let dataset = ws.dataset().expect("data directory loaded");
    let mut reports = std::collections::HashMap::new();
    let mut class_of = |c: &ColumnRef| -> Option<ColumnClass> {
        if dataset.table(c.table.as_str()).is_some() {
            if let Ok(r) = dataset.uniqueness(c) {
                let class = r.inferred_class;
                reports.insert(c.clone(), r);
                return Some(class);
            }
        }
        ws.catalog().column(c).and_then(|col| col.class)
    };
    // Scan first so the inference closure stays immutable.
    for t in ws.catalog().tables() {
        for c in &t.columns {
            class_of(&ColumnRef::new(t.name.clone(), &c.name));
        }
    }
    let proposed = infer_links_by_name(ws.catalog(), |c| {
        reports
            .get(c)
            .map(|r| r.inferred_class)
            .or_else(|| ws.catalog().column(c).and_then(|col| col.class))
    })?;

    let linked = |a: &ColumnRef, b: &ColumnRef| {
        ws.catalog()
            .links()
            .iter()
            .any(|l| (&l.left == a && &l.right == b) || (&l.left == b && &l.right == a))
    };
    let mut catalog = ws.catalog().clone();
    let mut added = 0;
    let mut stdout = io::stdout().lock();
    for link in &proposed {
        let status = if !link.kind.is_connectable() {
            "many-to-many, no edge"
        } else if linked(&link.left, &link.right) {
            "already linked"
        } else {
            "new"
        };
        writeln!(
            stdout,
            "{:<36} {} -> {}  [{status}]",
            link.id, link.left, link.right
        )?;
        if accept && status == "new" {
            let mandatory = reports.get(&link.left).is_some_and(|r| r.null_count == 0);
            catalog = catalog.add_link(LinkDraft::from(link).mandatory(mandatory))?;
            added += 1;
        }
    }
    if accept {
        let path = out
            .or_else(|| paths(config).ok().and_then(|p| p.metadata_path()))
            .expect("data directory set");
        save_catalog_file(&catalog, &path)?;
        writeln!(stdout, "added {added} links, wrote {}", path.display())?;
    }
    Ok(())
}

fn links_import(db: &Path, out: Option<PathBuf>) -> Outcome {
    let (catalog, skipped) = catalog_from_schema(&SqliteIntrospector::open(db)?)?;
    let mut stdout = io::stdout().lock();
    for l in catalog.links() {
        let flag = if l.mandatory { "mandatory" } else { "optional" };
        writeln!(stdout, "{:<36} {} -> {}  [{flag}]", l.id, l.left, l.right)?;
    }
    for s in &skipped {
        eprintln!(
            "warning: skipped {}({}) -> {}: {:?}",
            s.table,
            s.columns.join(", "),
            s.referenced_table,
            s.reason
        );
    }
    if let Some(path) = out {
        save_catalog_file(&catalog, &path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn graph_show(ws: &Workspace, dot: bool, json: bool, links: Option<String>) -> Outcome {
    let ids = links.as_deref().map(split_list);
    let graph = ws.graph_for(ids.as_deref())?;
    let mut stdout = io::stdout().lock();
    if dot {
        stdout.write_all(graph.to_dot().as_bytes())?;
        return Ok(());
    }
    if json {
        writeln!(
            stdout,
            "{}",
            serde_json::to_string(&graph.export()).expect("serializable")
        )?;
        return Ok(());
    }
    let summary = graph.summary();
    writeln!(
        stdout,
        "{} tables, {} edges",
        summary.node_count, summary.edge_count
    )?;
    for d in &summary.degrees {
        writeln!(
            stdout,
            "  {:<24} in {:<3} out {}",
            d.table, d.in_degree, d.out_degree
        )?;
    }
    for e in graph.edges() {
        writeln!(stdout, "  {} -> {}  [{}]", e.from, e.to, e.link_id)?;
    }
    Ok(())
}

fn plan(ws: &Workspace, tables: &str, json: bool) -> Outcome {
    let request = PlanRequest {
        targets: split_list(tables),
        max_depth: None,
    };
    let result = denorm_service::run_plan(ws, &request, None)?;
    let mut stdout = io::stdout().lock();
    if json {
        writeln!(stdout, "{}", result.to_json())?;
    } else if result.is_feasible() {
        let n = result.sequences.len();
        writeln!(stdout, "{n} join sequence{}", if n == 1 { "" } else { "s" })?;
        for (i, s) in result.sequences.iter().enumerate() {
            writeln!(stdout, "{}. origin {}", i + 1, s.origin)?;
            writeln!(stdout, "   {s}")?;
            writeln!(stdout, "   {}", s.chains().join("  "))?;
        }
    }
    if result.diagnostics.depth_truncated {
        eprintln!("note: some paths were cut off by the depth limit");
    }
    if !result.diagnostics.combination_cap_exceeded.is_empty() {
        eprintln!("note: combination cap reached for some origins");
    }
    if !result.is_feasible() {
        let names: Vec<String> = ws
            .targets(&request.targets)
            .tables()
            .iter()
            .map(|t| t.to_string())
            .collect();
        return Err(Failure::Infeasible(format!(
            "no join path connects {}",
            names.join(", ")
        )));
    }
    Ok(())
}

fn cell(v: &Value) -> String {
    v.to_string()
}

fn print_query(outcome: &QueryOutcome, format: Format, show_sql: bool) -> Outcome {
    let mut stdout = io::stdout().lock();
    if format == Format::Json {
        writeln!(
            stdout,
            "{}",
            serde_json::to_string(outcome).expect("serializable")
        )?;
        return Ok(());
    }
    if let Some(counts) = &outcome.row_counts {
        eprintln!(
            "row counts per sequence: {counts:?}, chosen {:?}",
            outcome.chosen
        );
    }
    let several = outcome.results.len() > 1;
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(stdout);
            for (i, r) in outcome.results.iter().enumerate() {
                if i == 0 {
                    let mut header: Vec<&str> = Vec::new();
                    if several {
                        header.push("sequence");
                    }
                    header.extend(r.rows.columns.iter().map(String::as_str));
                    w.write_record(&header)
                        .map_err(|e| io::Error::other(e.to_string()))?;
                }
                for row in &r.rows.rows {
                    let mut rec: Vec<String> = Vec::new();
                    if several {
                        rec.push((i + 1).to_string());
                    }
                    rec.extend(row.iter().map(cell));
                    w.write_record(&rec)
                        .map_err(|e| io::Error::other(e.to_string()))?;
                }
            }
            w.flush()?;
        }
        Format::Table => {
            for (i, r) in outcome.results.iter().enumerate() {
                if several || show_sql {
                    if let Some(seq) = outcome
                        .sequences
                        .get(i)
                        .filter(|_| outcome.results.len() == outcome.sequences.len())
                    {
                        writeln!(stdout, "-- {}", seq.chains().join("  "))?;
                    }
                }
                if show_sql {
                    writeln!(stdout, "{}", r.sql)?;
                }
                let rows: Vec<Vec<String>> = r
                    .rows
                    .rows
                    .iter()
                    .map(|row| row.iter().map(cell).collect())
                    .collect();
                let widths: Vec<usize> = r
                    .rows
                    .columns
                    .iter()
                    .enumerate()
                    .map(|(c, h)| {
                        rows.iter()
                            .map(|row| row[c].chars().count())
                            .chain([h.chars().count()])
                            .max()
                            .unwrap_or(0)
                    })
                    .collect();
                let line = |cells: &[String]| {
                    cells
                        .iter()
                        .zip(&widths)
                        .map(|(c, w)| format!("{c:<w$}"))
                        .collect::<Vec<_>>()
                        .join("  ")
                        .trim_end()
                        .to_owned()
                };
                writeln!(stdout, "{}", line(&r.rows.columns))?;
                writeln!(
                    stdout,
                    "{}",
                    widths
                        .iter()
                        .map(|w| "-".repeat(*w))
                        .collect::<Vec<_>>()
                        .join("  ")
                )?;
                for row in &rows {
                    writeln!(stdout, "{}", line(row))?;
                }
                writeln!(stdout, "({} of {} rows)", rows.len(), r.total_rows)?;
            }
        }
        Format::Json => unreachable!(),
    }
    Ok(())
}

fn serve(workspace: Option<Arc<Workspace>>, config: &ServiceConfig, addr: SocketAddr) -> Outcome {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(io::stderr)
        .init();
    if workspace.is_none() {
        eprintln!("no data loaded; API calls answer 503 until restarted with --data or --metadata");
    }
    let app = denorm_service::router(workspace, config);
    tokio::runtime::Runtime::new()?.block_on(denorm_service::serve(app, addr))?;
    Ok(())
}
