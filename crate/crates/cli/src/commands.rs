use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use semcom_core::codec::{payload_metrics, CodecConfig};
use semcom_core::corpus::{self, build_relation_stats, RelationStats};
use semcom_core::embedding::{from_config, Backend, Embedder, EmbedderConfig};
use semcom_core::filter::{filter_scene_graph, FilterConfig, FilterReport};
use semcom_core::perf::{
    block_size_for, link_goodput, payload_bits, rate_adaptation, rows_to_csv, sweep_throughput, tasks_per_second,
    transmission_latency_ms, BlerTable, GrantConfig, LatencyProfile, PipelineMode, PreparedScene, RateChoice,
    SweepConfig,
};
use semcom_core::phy::{simulate_bler, CodeRate, InfoBlockSize, LinkConfig, Segmentation};
use semcom_core::select::{assemble_payload, Policy, Selection};
use semcom_core::{
    CodecError, CorpusError, EmbedError, FidelityLevel, FilterError, PerfError, PhyError, SceneAnnotation, SceneGraph,
    SelectError, SemanticKind, TaskKind,
};

use crate::{Command, EmbedArgs, EmbedderArg, LinkArgs, ModeArg, SceneSource, Thresholds};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Perf(#[from] PerfError),
}

impl CliError {
    pub fn name(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "UsageError",
            CliError::Io { .. } => "IoError",
            CliError::Corpus(_) => "CorpusError",
            CliError::Embed(_) => "EmbedError",
            CliError::Filter(_) => "FilterError",
            CliError::Codec(_) => "CodecError",
            CliError::Select(_) => "SelectError",
            CliError::Phy(_) => "PhyError",
            CliError::Perf(_) => "PerfError",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{}: no such file", path.display())))
    }
}

fn require_dir(path: &Path) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(usage(format!("{}: no such directory", path.display())))
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Writes to `out` if given, otherwise stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn echo_seed(seed: u64) {
    eprintln!("seed: {seed}");
}

fn parse_selections(tokens: &[String], codec: &mut CodecConfig) -> Result<Vec<Selection>> {
    tokens
        .iter()
        .map(|t| {
            let t = t.trim();
            match t.split_once(':') {
                Some((kind, bpp)) => {
                    let sel: Selection = kind.parse().map_err(|e: SelectError| usage(e.to_string()))?;
                    if sel.kind != SemanticKind::CompressedImage {
                        return Err(usage(format!("only compressed_image takes a size, got {t:?}")));
                    }
                    let bpp: f64 = bpp.parse().map_err(|_| usage(format!("bad bpp in {t:?}")))?;
                    codec.compressed_image_bpp = Some(bpp);
                    Ok(sel)
                }
                None => t.parse().map_err(|e: SelectError| usage(e.to_string())),
            }
        })
        .collect()
}

fn filter_config(t: &Thresholds) -> Result<FilterConfig> {
    let cfg = FilterConfig {
        tau_f: t.tau_f,
        tau_r: t.tau_r,
        ..FilterConfig::default()
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn embedder(args: &EmbedArgs) -> Result<Box<dyn Embedder>> {
    let backend = match args.embedder {
        EmbedderArg::Hash => Backend::Hash,
        EmbedderArg::File => Backend::File,
        EmbedderArg::Remote => Backend::Remote,
    };
    if backend == Backend::File {
        let path = args
            .embeddings_file
            .as_deref()
            .ok_or_else(|| usage("--embedder file needs --embeddings-file"))?;
        require_file(path)?;
    }
    if backend == Backend::Remote && args.endpoint.is_none() {
        return Err(usage("--embedder remote needs --endpoint or SEMCOM_EMBED_URL"));
    }
    let cfg = EmbedderConfig {
        backend,
        dim: args.dim,
        seed: args.seed,
        path: args.embeddings_file.clone(),
        endpoint_url: args.endpoint.clone(),
        ..EmbedderConfig::default()
    };
    from_config(&cfg).map_err(|e| match e {
        EmbedError::InvalidConfig(m) => usage(m),
        other => other.into(),
    })
}

fn load_stats(path: &Path) -> Result<RelationStats> {
    require_file(path)?;
    Ok(corpus::load_stats(path)?)
}

fn snr_list(snrs: &[f64]) -> Result<Vec<f64>> {
    if snrs.is_empty() {
        return Err(usage("--snrs needs at least one value"));
    }
    if let Some(bad) = snrs.iter().find(|s| s.is_nan()) {
        return Err(usage(format!("bad SNR {bad}")));
    }
    Ok(snrs.to_vec())
}

fn rate_choice(text: &str) -> Result<RateChoice> {
    text.parse().map_err(|e: PhyError| usage(e.to_string()))
}

fn rates_for(choice: RateChoice) -> Vec<CodeRate> {
    match choice {
        RateChoice::Auto => CodeRate::ALL.to_vec(),
        RateChoice::Fixed(r) => vec![r],
    }
}

fn block_sizes(kinds: &[Selection]) -> Vec<InfoBlockSize> {
    let mut sizes: Vec<InfoBlockSize> = kinds.iter().map(block_size_for).collect();
    sizes.sort();
    sizes.dedup();
    sizes
}

fn check_blocks(blocks: u64) -> Result<()> {
    if blocks == 0 {
        return Err(usage("--blocks must be at least 1"));
    }
    Ok(())
}

/// A loaded scene with its filtered graph, computed only when a selection needs it.
struct Loaded {
    scene: SceneAnnotation,
    filtered: Option<(SceneGraph, FilterReport)>,
}

fn load_source(source: &SceneSource, selections: &[Selection]) -> Result<Loaded> {
    let path = source.scene.as_deref().ok_or_else(|| usage("--scene is required"))?;
    require_file(path)?;
    let needs_filter = selections.iter().any(Selection::needs_filtered_graph);
    let cfg = filter_config(&source.thresholds)?;
    let stats = match (&source.stats, needs_filter) {
        (Some(p), true) => Some(load_stats(p)?),
        (None, true) => return Err(usage("filtered selections need --stats")),
        _ => None,
    };
    let emb = if needs_filter {
        Some(embedder(&source.embed)?)
    } else {
        None
    };
    let scene = corpus::load_scene_file(path)?;
    let filtered = match (stats, emb) {
        (Some(stats), Some(emb)) => Some(filter_scene_graph(&scene.graph, &stats, emb.as_ref(), &cfg)?),
        _ => None,
    };
    Ok(Loaded { scene, filtered })
}

fn encode_loaded(
    loaded: &Loaded,
    selections: &[Selection],
    codec: &CodecConfig,
    out: Option<&Path>,
    report: Option<&Path>,
    mut summary: serde_json::Map<String, Value>,
) -> Result<()> {
    let filtered = loaded.filtered.as_ref().map(|(g, _)| g);
    let payload = assemble_payload(&loaded.scene, selections, filtered, codec)?;
    let (w, h) = payload.source_image;
    let metrics = payload_metrics(payload.bit_count, w, h);
    let sections: Vec<Value> = selections
        .iter()
        .zip(&payload.sections)
        .map(|(sel, p)| json!({"kind": sel.to_string(), "bits": p.bit_count}))
        .collect();
    summary.insert("image_id".into(), json!(loaded.scene.image_id));
    summary.insert("sections".into(), json!(sections));
    summary.insert("total_bits".into(), json!(payload.bit_count));
    summary.insert("bpp".into(), json!(metrics.bpp));
    summary.insert("compression_rate".into(), json!(metrics.compression_rate));
    if let Some((_, rep)) = &loaded.filtered {
        summary.insert("retention_fraction".into(), json!(rep.retention_fraction));
    }
    if let Some(p) = out {
        write_bytes(p, &payload.to_bytes())?;
    }
    let value = Value::Object(summary);
    match report {
        Some(p) => write_json(p, &value),
        None => emit(None, &(serde_json::to_string_pretty(&value).unwrap() + "\n")),
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { corpus: dir, out } => {
            require_dir(&dir)?;
            let scenes = corpus::load_corpus(&dir)?;
            let stats = build_relation_stats(&scenes);
            corpus::persist_stats(&stats, &out)?;
            println!(
                "ingested {} scenes: {} subject-object pairs, {} triples",
                stats.corpus_size,
                stats.pair_counts.len(),
                stats.triple_counts.len()
            );
            Ok(())
        }
        Command::Filter {
            scene,
            stats,
            embed,
            thresholds,
            report,
            out,
        } => {
            require_file(&scene)?;
            let cfg = filter_config(&thresholds)?;
            let stats = load_stats(&stats)?;
            let emb = embedder(&embed)?;
            let annotation = corpus::load_scene_file(&scene)?;
            echo_seed(embed.seed);
            let (filtered, rep) = filter_scene_graph(&annotation.graph, &stats, emb.as_ref(), &cfg)?;
            let mut value = serde_json::to_value(&rep).expect("report serializes");
            value["seed"] = json!(embed.seed);
            value["image_id"] = json!(annotation.image_id);
            match &report {
                Some(p) => write_json(p, &value)?,
                None => emit(None, &(serde_json::to_string_pretty(&value).unwrap() + "\n"))?,
            }
            if let Some(p) = &out {
                let mut doc = corpus::scene_document(&annotation, &filtered);
                doc.push('\n');
                write_bytes(p, doc.as_bytes())?;
            }
            eprintln!(
                "kept {} of {} relations (retention {:.3})",
                rep.kept.len(),
                rep.input_relations,
                rep.retention_fraction
            );
            Ok(())
        }
        Command::Select {
            task,
            fidelity,
            policy,
            source,
            out,
            report,
        } => {
            let task: TaskKind = task.parse().map_err(|e: SelectError| usage(e.to_string()))?;
            let fidelity: FidelityLevel = fidelity.parse().map_err(|e: SelectError| usage(e.to_string()))?;
            let policy = match &policy {
                Some(p) => {
                    require_file(p)?;
                    Policy::default().with_overrides(&read_text(p)?)?
                }
                None => Policy::default(),
            };
            let selections = policy.lookup(task, fidelity);
            let names: Vec<String> = selections.iter().map(|s| s.to_string()).collect();
            if source.scene.is_none() {
                if out.is_some() {
                    return Err(usage("--out needs --scene"));
                }
                let value = json!({"task": task.to_string(), "fidelity": fidelity.to_string(), "kinds": names});
                return match &report {
                    Some(p) => write_json(p, &value),
                    None => emit(None, &format!("{}\n", names.join(","))),
                };
            }
            let loaded = load_source(&source, &selections)?;
            let mut summary = serde_json::Map::new();
            summary.insert("task".into(), json!(task.to_string()));
            summary.insert("fidelity".into(), json!(fidelity.to_string()));
            if loaded.filtered.is_some() {
                echo_seed(source.embed.seed);
                summary.insert("seed".into(), json!(source.embed.seed));
            }
            encode_loaded(
                &loaded,
                &selections,
                &CodecConfig::default(),
                out.as_deref(),
                report.as_deref(),
                summary,
            )
        }
        Command::Encode {
            kinds,
            source,
            out,
            report,
        } => {
            let mut codec = CodecConfig::default();
            let selections = parse_selections(&kinds, &mut codec)?;
            codec.validate().map_err(|e| usage(e.to_string()))?;
            let loaded = load_source(&source, &selections)?;
            let mut summary = serde_json::Map::new();
            if loaded.filtered.is_some() {
                echo_seed(source.embed.seed);
                summary.insert("seed".into(), json!(source.embed.seed));
            }
            encode_loaded(&loaded, &selections, &codec, out.as_deref(), report.as_deref(), summary)
        }
        Command::Simulate {
            kinds,
            snrs,
            rate,
            blocks,
            seed,
            out,
        } => {
            let selections = parse_selections(&kinds, &mut CodecConfig::default())?;
            let snrs = snr_list(&snrs)?;
            let rates = rates_for(rate_choice(&rate)?);
            check_blocks(blocks)?;
            echo_seed(seed);
            let mut csv = String::from("info_bits,code_rate,snr_db,blocks,block_errors,bler,seed\n");
            for size in block_sizes(&selections) {
                for &r in &rates {
                    for &snr in &snrs {
                        let res = simulate_bler(&LinkConfig::new(size, r, snr, seed), blocks)?;
                        csv.push_str(&format!(
                            "{},{},{},{},{},{:.6},{}\n",
                            size.bits(),
                            r,
                            snr,
                            res.blocks_sent,
                            res.block_errors,
                            res.bler,
                            res.seed
                        ));
                    }
                }
            }
            emit(out.as_deref(), &csv)
        }
        Command::Sweep {
            corpus: dir,
            kinds,
            snrs,
            stats,
            embed,
            thresholds,
            link,
            out,
        } => {
            require_dir(&dir)?;
            let mut codec = CodecConfig::default();
            let selections = parse_selections(&kinds, &mut codec)?;
            codec.validate().map_err(|e| usage(e.to_string()))?;
            let snrs = snr_list(&snrs)?;
            let config = sweep_config(&link, codec)?;
            let filter_cfg = filter_config(&thresholds)?;
            let needs_filter = selections.iter().any(Selection::needs_filtered_graph);
            let emb = if needs_filter { Some(embedder(&embed)?) } else { None };
            let scenes = corpus::load_corpus(&dir)?;
            let stats = match &stats {
                Some(p) => load_stats(p)?,
                None => build_relation_stats(&scenes),
            };
            echo_seed(embed.seed);
            let prepared = scenes
                .into_iter()
                .map(|scene| -> Result<PreparedScene> {
                    let filtered = match &emb {
                        Some(e) => Some(filter_scene_graph(&scene.graph, &stats, e.as_ref(), &filter_cfg)?.0),
                        None => None,
                    };
                    Ok(PreparedScene { scene, filtered })
                })
                .collect::<Result<Vec<_>>>()?;
            let table = BlerTable::simulate(
                &block_sizes(&selections),
                &rates_for(config.rate),
                &snrs,
                link.blocks,
                embed.seed,
            )?;
            let rows = sweep_throughput(&prepared, &selections, &snrs, &table, &config)?;
            emit(out.as_deref(), &rows_to_csv(&rows))
        }
        Command::Latency {
            profile,
            mode,
            kinds,
            snrs,
            source,
            link,
            out,
        } => {
            require_file(&profile)?;
            let mut prof = LatencyProfile::parse(&read_text(&profile)?).map_err(|e| usage(e.to_string()))?;
            let mut value = json!({});
            if prof.tau_tx.is_none() {
                let (tau_tx, detail) = computed_tau_tx(&kinds, &snrs, &source, &link)?;
                prof = prof.with_tau_tx(tau_tx);
                value["tau_tx_source"] = detail;
                value["seed"] = json!(source.embed.seed);
            }
            let mode = match mode {
                ModeArg::Sequential => PipelineMode::Sequential,
                ModeArg::Pipelined => PipelineMode::Pipelined,
            };
            let tps = tasks_per_second(&prof, mode)?;
            value["profile"] = serde_json::to_value(prof).expect("profile serializes");
            value["total_ms"] = json!(prof.total()?);
            value["mode"] = json!(format!("{mode:?}").to_lowercase());
            value["tasks_per_second"] = json!(tps);
            let text = serde_json::to_string_pretty(&value).unwrap() + "\n";
            emit(out.as_deref(), &text)
        }
    }
}

fn sweep_config(link: &LinkArgs, codec: CodecConfig) -> Result<SweepConfig> {
    if !(0.0..=1.0).contains(&link.target_bler) {
        return Err(usage(format!("--target-bler {} outside [0, 1]", link.target_bler)));
    }
    check_blocks(link.blocks)?;
    let grant = GrantConfig {
        n_rb: link.grant_rb,
        ..GrantConfig::default()
    };
    grant.validate().map_err(|e| usage(e.to_string()))?;
    Ok(SweepConfig {
        grant,
        codec,
        rate: rate_choice(&link.rate)?,
        target_bler: link.target_bler,
        ideal_link: link.ideal_link,
    })
}

/// Air time of the named payload over the configured link, per kind summed.
fn computed_tau_tx(kinds: &[String], snrs: &[f64], source: &SceneSource, link: &LinkArgs) -> Result<(f64, Value)> {
    if kinds.is_empty() || source.scene.is_none() {
        return Err(usage("profile has no tau_tx: give --scene and --kinds to compute it"));
    }
    let snr = match snrs {
        [s] if !s.is_nan() => *s,
        _ => return Err(usage("computing tau_tx needs exactly one --snrs value")),
    };
    let mut codec = CodecConfig::default();
    let selections = parse_selections(kinds, &mut codec)?;
    let config = sweep_config(link, codec)?;
    let loaded = load_source(source, &selections)?;
    let prepared = PreparedScene {
        scene: loaded.scene,
        filtered: loaded.filtered.map(|(g, _)| g),
    };
    let seed = source.embed.seed;
    echo_seed(seed);
    let mut total = 0.0;
    let mut parts = Vec::new();
    for sel in &selections {
        let size = block_size_for(sel);
        let bits = payload_bits(sel, &prepared, &config.codec)?;
        let padded = Segmentation::for_length(bits, size.bits())?.padded_bits();
        let table = BlerTable::simulate(&[size], &rates_for(config.rate), &[snr], link.blocks, seed)?;
        let rate = match config.rate {
            RateChoice::Auto => rate_adaptation(snr, size, &table, config.target_bler)?,
            RateChoice::Fixed(r) => r,
        };
        let bler = if config.ideal_link {
            0.0
        } else {
            table.get(size, rate, snr)?
        };
        let ms = transmission_latency_ms(padded as f64, link_goodput(&config.grant, rate, bler)?)?;
        total += ms;
        parts.push(json!({"kind": sel.to_string(), "padded_bits": padded, "code_rate": rate.to_string(), "bler": bler, "tau_tx": ms}));
    }
    Ok((total, json!({"snr_db": snr, "kinds": parts})))
}
