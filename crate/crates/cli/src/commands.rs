use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use subprof::corpus::{
    build_corpus, make_partitions, read_records, write_records, Corpus, Vocabulary,
};
use subprof::eval::experiment::{query_seed, QueryMetrics};
use subprof::eval::queries::{
    make_qrels, make_query, read_memberships, text_query, write_memberships,
};
use subprof::eval::{
    memberships_from_participation, run_on_partitions, MetricKind, MetricReport, System,
};
use subprof::fusion::{comb_lg_dcs, fuse_lm_hits};
use subprof::lda::{self, choose_k, TopicModel};
use subprof::profiles::{
    build_lda_subprofiles, build_term_intervention, build_term_monolithic, build_topic_profiles,
    load_profiles, profile_stats_with, save_profiles, split_counts, ProfileRef, Subprofile,
    TopicProfile, TopicProfileMode,
};
use subprof::retrieval::{
    cosine_topic_search, hits_from_run, read_run, search, write_hits, write_run, Index, Query,
    ScoredHit,
};
use subprof::splitter::{split_corpus, write_debug_dump};
use subprof::synth::{generate, SynthParams};
use subprof::topicselect::{measure_score, select_count, Measure, SortedTopicDist, Strategy};

use crate::config::RunConfig;
use crate::workdir::{create, require, Workdir};
use crate::CliError;

pub struct Context {
    pub workdir: Workdir,
    pub config: RunConfig,
    pub seed: Option<u64>,
}

impl Context {
    fn memberships(&self, train: &Corpus) -> Result<subprof::eval::Memberships, CliError> {
        match &self.config.paths.memberships {
            Some(path) => Ok(read_memberships(&require(path, "synth")?)?),
            None => Ok(memberships_from_participation(train)),
        }
    }

    fn model(&self, split: usize) -> Result<TopicModel, CliError> {
        Ok(TopicModel::load(&require(
            &self.workdir.model(split),
            "train",
        )?)?)
    }
}

fn finish<W: Write>(mut out: W) -> Result<(), CliError> {
    out.flush()?;
    Ok(())
}

pub fn synth(ctx: &Context, params: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let mut params = match params {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            toml::from_str::<SynthParams>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => SynthParams::default(),
    };
    if let Some(seed) = ctx.seed {
        params.seed = seed;
    }
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.workdir.root().to_path_buf());
    std::fs::create_dir_all(&dir)?;
    let (records, truth) = generate(&params)?;
    write_records(&dir.join("records.jsonl"), &records)?;
    truth.save(&dir.join("truth.txt"))?;
    truth.save_token_topics(&dir.join("token_topics.txt"), &records)?;
    write_memberships(&dir.join("memberships.txt"), &truth.memberships())?;
    println!(
        "{} records, {} initiatives, {} candidates -> {}",
        records.len(),
        truth.initiative_committee.len(),
        truth.expertise.len(),
        dir.display()
    );
    Ok(())
}

pub fn ingest(ctx: &Context, input: Option<&Path>) -> Result<(), CliError> {
    let input: PathBuf = input
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.config.paths.corpus.clone());
    let records = read_records(&require(&input, "synth")?)?;
    let (corpus, vocab) = build_corpus(&records, &ctx.config.preprocess_config()?)?;
    let wd = &ctx.workdir;
    corpus.save(&wd.file("corpus.json"))?;
    vocab.save(&wd.file("vocab.json"))?;
    corpus.write_skip_log(&wd.file("skipped.tsv"))?;
    let eval = &ctx.config.evaluation;
    let parts = make_partitions(&corpus, eval.ratio, eval.splits, eval.seed)?;
    wd.save_partitions(&parts)?;
    let stats = corpus.stats(vocab.len());
    println!(
        "{} documents, {} initiatives, {} terms, {} skipped, {} splits",
        stats.n,
        corpus.initiatives.len(),
        stats.m,
        corpus.skipped.len(),
        parts.len()
    );
    Ok(())
}

pub fn train(ctx: &Context, split: Option<usize>) -> Result<(), CliError> {
    let (corpus, vocab) = ctx.workdir.load_corpus()?;
    let heuristic = ctx.config.k_heuristic()?;
    for part in ctx.workdir.partitions(split)? {
        let train = corpus.subset(&part.train);
        let k = choose_k(train.stats(vocab.len()), heuristic);
        let model = lda::train(&train.documents, vocab.len(), &ctx.config.lda_config(k))?;
        let path = ctx.workdir.model(part.index);
        std::fs::create_dir_all(path.parent().expect("split dir"))?;
        model.save(&path)?;
        println!(
            "split {}: k = {k} ({heuristic}), {} documents",
            part.index,
            train.documents.len()
        );
    }
    Ok(())
}

pub fn split_docs(ctx: &Context, strategy: Strategy, split: Option<usize>) -> Result<(), CliError> {
    let (corpus, vocab) = ctx.workdir.load_corpus()?;
    for part in ctx.workdir.partitions(split)? {
        let train = corpus.subset(&part.train);
        let model = ctx.model(part.index)?;
        let splits = split_corpus(&model, &train.documents, strategy)?;
        let mut out = create(&ctx.workdir.subdocs(part.index, strategy.name()))?;
        write_debug_dump(&mut out, &splits, &vocab)?;
        finish(out)?;
        let n: usize = splits.iter().map(Vec::len).sum();
        println!(
            "split {}: {n} subdocuments from {} documents",
            part.index,
            splits.len()
        );
    }
    Ok(())
}

fn write_vectors(path: &Path, profiles: &[TopicProfile]) -> Result<(), CliError> {
    let mut out = create(path)?;
    for p in profiles {
        let values: Vec<String> = p.topics.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}\t{}", p.id, values.join(" "))?;
    }
    finish(out)
}

fn read_vectors(path: &Path) -> Result<Vec<TopicProfile>, CliError> {
    let name = path.display().to_string();
    let mut profiles = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let bad = |reason: &str| {
            CliError::from(subprof::Error::Parse {
                path: name.clone(),
                line: i + 1,
                reason: reason.to_string(),
            })
        };
        let (id, rest) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
        let topics = rest
            .split_ascii_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| bad("bad value")))
            .collect::<Result<Vec<_>, _>>()?;
        profiles.push(TopicProfile {
            id: id.parse::<ProfileRef>()?,
            topics,
        });
    }
    Ok(profiles)
}

pub fn profile(ctx: &Context, system: System, split: Option<usize>) -> Result<(), CliError> {
    let (corpus, vocab) = ctx.workdir.load_corpus()?;
    for part in ctx.workdir.partitions(split)? {
        let train = corpus.subset(&part.train);
        let wd = &ctx.workdir;
        let count = match system {
            System::TopicMon | System::TopicInt => {
                let mode = if system == System::TopicMon {
                    TopicProfileMode::Monolithic
                } else {
                    TopicProfileMode::Intervention
                };
                let k = choose_k(train.stats(vocab.len()), ctx.config.k_heuristic()?);
                let (model, profiles) =
                    build_topic_profiles(&train, vocab.len(), mode, &ctx.config.lda_config(k))?;
                let model_path = wd.profiles(part.index, system, "model");
                finish(create(&model_path)?)?;
                model.save(&model_path)?;
                write_vectors(&wd.profiles(part.index, system, "vectors"), &profiles)?;
                profiles.len()
            }
            _ => {
                let subprofiles = term_profiles(ctx, system, &train, part.index)?;
                let path = wd.profiles(part.index, system, "tsv");
                finish(create(&path)?)?;
                save_profiles(&path, &subprofiles, &vocab)?;
                subprofiles.len()
            }
        };
        println!("split {}: {count} {system} profiles", part.index);
    }
    Ok(())
}

fn term_profiles(
    ctx: &Context,
    system: System,
    train: &Corpus,
    split: usize,
) -> Result<Vec<Subprofile>, CliError> {
    Ok(match system {
        System::Lda(strategy) => build_lda_subprofiles(train, &ctx.model(split)?, strategy)?.0,
        System::TermMon => build_term_monolithic(train),
        System::TermInt => build_term_intervention(train),
        System::TopicMon | System::TopicInt => unreachable!("topic systems have no term profiles"),
    })
}

fn is_topic(system: System) -> bool {
    matches!(system, System::TopicMon | System::TopicInt)
}

pub fn index(ctx: &Context, system: System, split: Option<usize>) -> Result<(), CliError> {
    if is_topic(system) {
        return Err(CliError::Usage(format!(
            "{system} profiles are matched by cosine over topic vectors and need no index"
        )));
    }
    let vocab = Vocabulary::load(&require(&ctx.workdir.file("vocab.json"), "ingest")?)?;
    for part in ctx.workdir.partitions(split)? {
        let wd = &ctx.workdir;
        let profiles = load_profiles(
            &require(&wd.profiles(part.index, system, "tsv"), "profile")?,
            &vocab,
        )?;
        let index = Index::build(profiles)?;
        let path = wd.index(part.index, system);
        finish(create(&path)?)?;
        index.save(&path)?;
        println!(
            "split {}: {} units, {} tokens",
            part.index,
            index.len(),
            index.collection_len()
        );
    }
    Ok(())
}

enum Searcher {
    Terms(Index),
    Topics(TopicModel, Vec<TopicProfile>),
}

impl Searcher {
    fn load(ctx: &Context, system: System, split: usize) -> Result<Self, CliError> {
        let wd = &ctx.workdir;
        if is_topic(system) {
            let model =
                TopicModel::load(&require(&wd.profiles(split, system, "model"), "profile")?)?;
            let vectors =
                read_vectors(&require(&wd.profiles(split, system, "vectors"), "profile")?)?;
            Ok(Searcher::Topics(model, vectors))
        } else {
            Ok(Searcher::Terms(Index::load(&require(
                &wd.index(split, system),
                "index",
            )?)?))
        }
    }

    fn hits(&self, query: &Query, ctx: &Context, top: usize) -> Result<Vec<ScoredHit>, CliError> {
        Ok(match self {
            Searcher::Terms(index) => search(query, index, ctx.config.retrieval.mu, top),
            Searcher::Topics(model, profiles) => {
                let seed = query_seed(ctx.config.lda.seed, &query.id);
                let q = lda::fold_in(model, &query.terms, ctx.config.lda.fold_in_iterations, seed)?;
                cosine_topic_search(&q, profiles, top)?
            }
        })
    }
}

pub struct SearchArgs<'a> {
    pub system: System,
    pub split: usize,
    pub query: Option<&'a str>,
    pub top: Option<usize>,
}

pub fn search_cmd(ctx: &Context, args: SearchArgs) -> Result<(), CliError> {
    let (corpus, vocab) = ctx.workdir.load_corpus()?;
    let cfg = ctx.config.preprocess_config()?;
    let searcher = Searcher::load(ctx, args.system, args.split)?;
    let top = args.top.unwrap_or(ctx.config.retrieval.depth);
    let tag = args.system.to_string();
    if let Some(text) = args.query {
        let query = text_query("q", text, &vocab, &cfg)?;
        let hits = searcher.hits(&query, ctx, top)?;
        let stdout = io::stdout();
        let mut out = stdout.lock();
        write_hits(&mut out, &query.id, &hits, &tag)?;
        return finish(out);
    }

    let part = ctx.workdir.partitions(Some(args.split))?.remove(0);
    let train = corpus.subset(&part.train);
    let test = corpus
        .initiatives
        .iter()
        .filter(|i| part.test.contains(&i.id));
    let qrels = make_qrels(
        test,
        &ctx.memberships(&train)?,
        &train,
        ctx.config.evaluation.min_interventions,
    );
    let mut qrels_out = create(&ctx.workdir.qrels(part.index))?;
    qrels.write(&mut qrels_out)?;
    finish(qrels_out)?;

    let mut out = create(&ctx.workdir.run(part.index, args.system, "run"))?;
    let (mut n, mut skipped) = (0, 0);
    for id in qrels.queries.keys() {
        let init = corpus.initiative(id).expect("qrels come from the corpus");
        match make_query(init, &vocab, &cfg) {
            Ok(query) => {
                write_hits(&mut out, &query.id, &searcher.hits(&query, ctx, top)?, &tag)?;
                n += 1;
            }
            Err(subprof::Error::EmptyQuery(_)) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    finish(out)?;
    println!("split {}: {n} queries run, {skipped} empty", part.index);
    Ok(())
}

pub fn fuse(
    ctx: &Context,
    system: System,
    split: usize,
    input: Option<&Path>,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let input = match input {
        Some(p) => require(p, "search")?,
        None => require(
            &ctx.workdir.run(split, system, "run"),
            "search --test-queries",
        )?,
    };
    let name = input.display().to_string();
    let runs = read_run(BufReader::new(File::open(&input)?), &name)?;
    let output = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.workdir.run(split, system, "fused"));
    let mut out = create(&output)?;
    let tag = format!("{system}-fused");
    for (qid, lines) in &runs {
        let hits = hits_from_run(lines)?;
        let ranking = if is_topic(system) {
            comb_lg_dcs(&hits)
        } else {
            fuse_lm_hits(&hits, ctx.config.retrieval.depth)
        };
        write_run(
            &mut out,
            qid,
            ranking
                .entries
                .iter()
                .enumerate()
                .map(|(i, (c, s))| (c, i + 1, *s)),
            &tag,
        )?;
    }
    finish(out)?;
    println!("{} queries fused -> {}", runs.len(), output.display());
    Ok(())
}

fn split_rows(report: &MetricReport, split: usize) -> Vec<(String, String, [f64; 3], usize)> {
    report
        .rows
        .iter()
        .map(|r| {
            let qs: Vec<&QueryMetrics> = r.per_query.iter().filter(|m| m.split == split).collect();
            let n = qs.len().max(1) as f64;
            let mean = |f: fn(&QueryMetrics) -> f64| qs.iter().map(|m| f(m)).sum::<f64>() / n;
            (
                r.system.clone(),
                r.k.clone(),
                [
                    mean(|m| m.ndcg),
                    mean(|m| m.precision),
                    mean(|m| m.recall_nr),
                ],
                qs.len(),
            )
        })
        .collect()
}

pub fn evaluate(ctx: &Context, p_values: bool) -> Result<(), CliError> {
    let (corpus, vocab) = ctx.workdir.load_corpus()?;
    let parts = ctx.workdir.load_partitions()?;
    let config = ctx.config.experiment()?;
    let memberships = match &ctx.config.paths.memberships {
        Some(path) => Some(read_memberships(&require(path, "synth")?)?),
        None => None,
    };
    let report = run_on_partitions(&corpus, &vocab, memberships.as_ref(), &parts, &config)?;
    let wd = &ctx.workdir;

    let mut table = Vec::new();
    report.write_table(&mut table)?;
    std::fs::write(wd.file("report.txt"), &table)?;
    let mut jsonl = create(&wd.file("report.jsonl"))?;
    report.write_jsonl(&mut jsonl)?;
    finish(jsonl)?;
    let mut stats = create(&wd.file("stats.txt"))?;
    report.write_stats(&mut stats)?;
    finish(stats)?;
    if p_values {
        let mut out = create(&wd.file("pvalues.txt"))?;
        for (name, metric) in [
            ("ndcg", MetricKind::Ndcg),
            ("precision", MetricKind::Precision),
            ("recall_nr", MetricKind::RecallNr),
        ] {
            writeln!(out, "# {name}")?;
            report.write_p_values(&mut out, metric)?;
        }
        finish(out)?;
    }
    if config.scatter {
        let mut out = create(&wd.file("scatter.txt"))?;
        for row in &report.scatter {
            writeln!(out, "# split {} {} k {}", row.split, row.strategy, row.k)?;
            for (topic_h, cand_h) in &row.points {
                writeln!(out, "{topic_h} {cand_h}")?;
            }
        }
        finish(out)?;
    }

    for part in &parts {
        let train = corpus.subset(&part.train);
        let test = corpus
            .initiatives
            .iter()
            .filter(|i| part.test.contains(&i.id));
        let derived;
        let m = match &memberships {
            Some(m) => m,
            None => {
                derived = memberships_from_participation(&train);
                &derived
            }
        };
        let qrels = make_qrels(test, m, &train, config.min_interventions);
        let mut out = create(&wd.qrels(part.index))?;
        qrels.write(&mut out)?;
        finish(out)?;
        let mut out = create(&wd.split_dir(part.index).join("report.txt"))?;
        writeln!(
            out,
            "{:<10} {:<10} {:>9} {:>9} {:>10} {:>8}",
            "system", "k", "ndcg", "p", "recall@nr", "queries"
        )?;
        for (system, k, [a, b, c], n) in split_rows(&report, part.index) {
            writeln!(
                out,
                "{system:<10} {k:<10} {a:>9.4} {b:>9.4} {c:>10.4} {n:>8}"
            )?;
        }
        finish(out)?;
    }

    io::stdout().write_all(&table)?;
    if !report.skipped_queries.is_empty() {
        eprintln!(
            "{} queries skipped as empty after preprocessing",
            report.skipped_queries.len()
        );
    }
    Ok(())
}

pub fn stats(ctx: &Context, split: Option<usize>) -> Result<(), CliError> {
    let (corpus, _) = ctx.workdir.load_corpus()?;
    let strategies = ctx.config.strategies()?;
    for part in ctx.workdir.partitions(split)? {
        let train = corpus.subset(&part.train);
        let model = ctx.model(part.index)?;
        let mut rows = Vec::new();
        for &s in &strategies {
            let (subprofiles, splits) = build_lda_subprofiles(&train, &model, s)?;
            let st = profile_stats_with(
                &subprofiles,
                &split_counts(&train.documents, &splits),
                ctx.config.profiles.tiny,
            );
            rows.push((s.to_string(), st));
        }
        let mut text = Vec::new();
        writeln!(text, "split {}, k {}", part.index, model.k)?;
        subprof::profiles::write_stats_table(&mut text, &rows)?;
        std::fs::write(ctx.workdir.split_dir(part.index).join("stats.txt"), &text)?;
        io::stdout().write_all(&text)?;
    }
    Ok(())
}

pub fn measures(dist: &str) -> Result<(), CliError> {
    let probs = dist
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad probability `{v}`")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let dist = SortedTopicDist::from_unsorted(&probs)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    write!(out, "{:<14} {:<10} {:>4}", "measure", "strategy", "j*")?;
    for j in 1..=dist.k() {
        write!(out, " {:>10}", format!("j={j}"))?;
    }
    writeln!(out)?;
    for m in Measure::ALL {
        let best = subprof::topicselect::brute_force_select(&dist, m)?;
        write!(
            out,
            "{:<14} {:<10} {best:>4}",
            m.name(),
            m.strategy().name()
        )?;
        for j in 1..=dist.k() {
            write!(out, " {:>10.4}", measure_score(&dist, j, m)?)?;
        }
        writeln!(out)?;
    }
    writeln!(out)?;
    for s in [
        Strategy::Cosine,
        Strategy::Sorensen,
        Strategy::Dice,
        Strategy::Euclidean,
        Strategy::Overlap,
    ] {
        let n = select_count(&dist, s)?;
        writeln!(out, "{:<10} {n}", s.name())?;
    }
    finish(out)
}
