use std::fmt::Display;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rotmap::evalmap::{
    fit_full_model, leave_cluster_out_cv, leave_stand_out_cv, render_prediction_map, segment_features, write_cv_csv,
};
use rotmap::geom::geojson::document_crs;
use rotmap::grid::{Grid, GridFrame, RasterManifest};
use rotmap::harvester::{read_tree_table, write_tree_table, TreeRecord};
use rotmap::learn::{load_model, model_to_json, Dataset, ForestParams};
use rotmap::pipeline::{self, PipelineConfig};
use rotmap::stands::{
    read_segments, read_stand_table, read_stands_geojson, stands_to_geojson, write_stand_table, Segment, StandSample,
    VariableSet,
};
use rotmap::synthgen::{generate_scenario, ScenarioConfig};
use std::collections::BTreeMap;

use crate::{
    Cli, CliError, Command, CvArgs, DelineateArgs, FeaturesArgs, ForestArgs, IngestArgs, MapArgs, ReportArgs, SiteArgs,
    Strategy, SynthArgs, TrainArgs, Vars,
};

type Result<T> = std::result::Result<T, CliError>;

fn data(e: impl Display) -> CliError {
    CliError::Data(e.to_string())
}

fn at(path: &Path, e: impl Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| at(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| at(path, e))?;
    log::info!("wrote path={}", path.display());
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| at(path, e))
}

/// Paths in a config file are relative to the file.
fn load_config(path: &Path) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(path).map_err(|e| CliError::Usage(e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut cfg.paths.trees, &mut cfg.paths.segments, &mut cfg.paths.rasters, &mut cfg.paths.out_dir]
        .into_iter()
        .flatten()
    {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str, key: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| CliError::Usage(format!("missing --{name} (or {key} in the config)")))
}

fn out_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn in_out_dir(flag: Option<PathBuf>, cfg: &PipelineConfig, file: &str) -> PathBuf {
    flag.unwrap_or_else(|| out_dir(cfg).join(file))
}

fn apply_forest(cfg: &mut PipelineConfig, args: &ForestArgs) -> Result<()> {
    if let Some(n) = args.ntree {
        cfg.ntree = n;
    }
    if let Some(n) = args.nodesize {
        cfg.nodesize = n;
    }
    if cfg.ntree == 0 || cfg.nodesize == 0 {
        return Err(CliError::Usage("--ntree and --nodesize must be positive".into()));
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Synth(a) => synth(a, &cfg),
        Command::Ingest(a) => ingest(a, &cfg),
        Command::Delineate(a) => delineate(a, cfg),
        Command::Features(a) => features(a, &cfg),
        Command::Train(a) => train(a, cfg),
        Command::Cv(a) => cv(a, cfg),
        Command::Map(a) => map(a, &cfg),
        Command::Report(a) => report(a, cfg),
    }
}

fn synth(args: SynthArgs, cfg: &PipelineConfig) -> Result<()> {
    let mut scenario: ScenarioConfig = match &args.scenario {
        Some(path) => toml::from_str(&read_text(path)?).map_err(|e| at(path, e))?,
        None => ScenarioConfig::default(),
    };
    if let Some(n) = args.clusters {
        scenario.n_clusters = n;
    }
    if let Some(n) = args.stands_per_cluster {
        scenario.stands_per_cluster = n;
    }
    if let Some(sd) = args.cluster_effect_sd {
        scenario.cluster_effect_sd = sd;
    }
    let (manifest, truth) = generate_scenario(&scenario, &args.out, cfg.seed).map_err(data)?;
    log::info!(
        "step=synth seed={} objects={} stands={} out={}",
        cfg.seed,
        manifest.harvester.len(),
        truth.len(),
        args.out.display()
    );
    Ok(())
}

fn production_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(input)
                .map_err(|e| at(input, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "hpr"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(CliError::Usage("no production files found".into()));
    }
    Ok(files)
}

fn ingest(args: IngestArgs, cfg: &PipelineConfig) -> Result<()> {
    let out = required(args.out, &cfg.paths.trees, "out", "paths.trees")?;
    let files = production_files(&args.inputs)?;
    let outcome = pipeline::ingest(&files, cfg.seed).map_err(data)?;
    let mut buf = Vec::new();
    write_tree_table(&mut buf, &outcome.trees).map_err(data)?;
    write_file(&out, buf)?;
    log::info!(
        "step=ingest files={} stems={} dropped={}",
        outcome.objects,
        outcome.trees.len(),
        outcome.dropped.len()
    );
    Ok(())
}

fn read_trees(path: &Path) -> Result<Vec<TreeRecord>> {
    let file = File::open(path).map_err(|e| at(path, e))?;
    read_tree_table(BufReader::new(file)).map_err(|e| at(path, e))
}

fn load_rasters(path: &Path) -> Result<(GridFrame, BTreeMap<String, Grid>)> {
    let manifest = RasterManifest::load(path).map_err(data)?;
    manifest.load_layers(&[]).map_err(data)
}

fn load_segments(path: &Path) -> Result<(Vec<Segment>, Option<String>)> {
    let segments = read_segments(path).map_err(data)?;
    Ok((segments, document_crs(&read_text(path)?)))
}

fn site_paths(site: SiteArgs, cfg: &PipelineConfig) -> Result<(PathBuf, PathBuf)> {
    Ok((
        required(site.segments, &cfg.paths.segments, "segments", "paths.segments")?,
        required(site.rasters, &cfg.paths.rasters, "rasters", "paths.rasters")?,
    ))
}

fn delineate(args: DelineateArgs, mut cfg: PipelineConfig) -> Result<()> {
    if let Some(v) = args.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = args.buffer {
        cfg.buffer_m = v;
    }
    if let Some(v) = args.min_area {
        cfg.min_area_ha = v;
    }
    if let Some(v) = args.min_stems {
        cfg.min_stems = v;
    }
    if let Some(v) = args.min_spruce {
        cfg.min_spruce_pct = v;
    }
    if !(cfg.alpha > 0.0) || !(cfg.buffer_m >= 0.0) {
        return Err(CliError::Usage("--alpha must be positive and --buffer non-negative".into()));
    }
    let trees_path = required(args.trees, &cfg.paths.trees, "trees", "paths.trees")?;
    let (segments_path, rasters_path) = site_paths(args.site, &cfg)?;
    let out = in_out_dir(args.out, &cfg, "stands.geojson");

    let trees = read_trees(&trees_path)?;
    let (segments, crs) = load_segments(&segments_path)?;
    let (frame, _) = load_rasters(&rasters_path)?;
    let d = pipeline::delineate(&trees, &segments, &frame, &cfg).map_err(data)?;
    for s in &d.skipped {
        log::warn!("object={} skipped reason={}", s.object_id, s.reason);
    }
    write_file(&out, stands_to_geojson(&d.stands, crs.as_deref()))?;
    log::info!(
        "step=delineate stands={} filtered={} skipped={}",
        d.stands.len(),
        d.filtered.len(),
        d.skipped.len()
    );
    Ok(())
}

fn features(args: FeaturesArgs, cfg: &PipelineConfig) -> Result<()> {
    let stands_path = in_out_dir(args.stands, cfg, "stands.geojson");
    let trees_path = required(args.trees, &cfg.paths.trees, "trees", "paths.trees")?;
    let rasters_path = required(args.rasters, &cfg.paths.rasters, "rasters", "paths.rasters")?;
    let out = in_out_dir(args.out, cfg, "stands.csv");

    let trees = read_trees(&trees_path)?;
    let (frame, grids) = load_rasters(&rasters_path)?;
    let stands = read_stands_geojson(&read_text(&stands_path)?, &frame).map_err(|e| at(&stands_path, e))?;
    let (samples, dropped) = pipeline::features(&stands, &trees, &grids, &frame, cfg).map_err(data)?;
    for d in &dropped {
        log::warn!("stand={} dropped reason=\"{}\"", d.stand_id, d.reason);
    }
    let mut buf = Vec::new();
    write_stand_table(&mut buf, &samples).map_err(data)?;
    write_file(&out, buf)?;
    log::info!("step=features stands={} dropped={}", samples.len(), dropped.len());
    Ok(())
}

fn read_table(path: &Path) -> Result<Vec<StandSample>> {
    let file = File::open(path).map_err(|e| at(path, e))?;
    read_stand_table(BufReader::new(file)).map_err(|e| at(path, e))
}

fn table_path(flag: Option<PathBuf>, cfg: &PipelineConfig) -> PathBuf {
    in_out_dir(flag, cfg, "stands.csv")
}

fn dataset(samples: &[StandSample], set: VariableSet, path: &Path) -> Result<Dataset> {
    Dataset::from_samples(samples, set).map_err(|e| at(path, e))
}

fn train(args: TrainArgs, mut cfg: PipelineConfig) -> Result<()> {
    apply_forest(&mut cfg, &args.forest)?;
    let table = table_path(args.table, &cfg);
    let set = args.vars.set();
    let out = in_out_dir(args.out, &cfg, &format!("model_{}.json", set.tag()));
    let samples = read_table(&table)?;
    let (model, _) = fit_full_model(&dataset(&samples, set, &table)?, set, &cfg.forest(), cfg.seed).map_err(data)?;
    write_file(&out, model_to_json(&model))?;
    log::info!(
        "step=train stands={} vars={} calibration_a={} calibration_b={}",
        samples.len(),
        set.tag(),
        model.calibration.a,
        model.calibration.b
    );
    Ok(())
}

fn cv(args: CvArgs, mut cfg: PipelineConfig) -> Result<()> {
    apply_forest(&mut cfg, &args.forest)?;
    if let Some(k) = args.k {
        cfg.k = Some(k);
    }
    if let Some(m) = args.min_cluster {
        cfg.min_cluster = m;
    }
    let table = table_path(args.table, &cfg);
    let set = args.vars.set();
    let name = match args.strategy {
        Strategy::Stand => "stand",
        Strategy::Cluster => "cluster",
    };
    let out = in_out_dir(args.out, &cfg, &format!("cv_{name}_{}.json", set.tag()));
    let samples = read_table(&table)?;
    let report = match args.strategy {
        Strategy::Stand => leave_stand_out_cv(&samples, set, &cfg.forest(), cfg.seed).map_err(|e| at(&table, e))?,
        Strategy::Cluster => {
            let clusters = pipeline::stand_clusters(&samples, &cfg).map_err(|e| at(&table, e))?;
            log::info!("clusters requested={} kept={} sizes={:?}", clusters.requested_k, clusters.k, clusters.sizes());
            leave_cluster_out_cv(&samples, &clusters, set, &cfg.forest(), cfg.seed).map_err(|e| at(&table, e))?
        }
    };
    write_file(&out, report.to_json())?;
    let mut buf = Vec::new();
    write_cv_csv(&mut buf, &report).map_err(data)?;
    write_file(&out.with_extension("csv"), buf)?;
    log::info!(
        "step=cv strategy={} vars={} folds={} rmse={:.4} md={:.4} pseudo_r2={:.4}",
        report.strategy.name(),
        set.tag(),
        report.folds.len(),
        report.metrics.rmse,
        report.metrics.md,
        report.metrics.pseudo_r2
    );
    Ok(())
}

fn map(args: MapArgs, cfg: &PipelineConfig) -> Result<()> {
    let model = load_model(&args.model).map_err(|e| at(&args.model, e))?;
    if model.variable_set == VariableSet::All {
        return render_prediction_map(&model, &[], &[], None).map(|_| ()).map_err(|e| at(&args.model, e));
    }
    let (segments_path, rasters_path) = site_paths(args.site, cfg)?;
    let out = in_out_dir(args.out, cfg, "map.geojson");
    let (segments, crs) = load_segments(&segments_path)?;
    let (frame, grids) = load_rasters(&rasters_path)?;
    let features = segment_features(&segments, &grids, &frame).map_err(data)?;
    let (records, text) = render_prediction_map(&model, &segments, &features, crs.as_deref()).map_err(data)?;
    write_file(&out, text)?;
    log::info!(
        "step=map segments={} applicable={}",
        records.len(),
        records.iter().filter(|r| r.applicable).count()
    );
    Ok(())
}

fn report(args: ReportArgs, mut cfg: PipelineConfig) -> Result<()> {
    apply_forest(&mut cfg, &args.forest)?;
    let table = table_path(args.table, &cfg);
    let dir = args.out_dir.unwrap_or_else(|| out_dir(&cfg));
    let samples = read_table(&table)?;
    let params: ForestParams = cfg.forest();

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "variable", "importance", "se", "rank"]).map_err(data)?;
    for vars in [Vars::All, Vars::Prior] {
        let set = vars.set();
        let (_, mut importance) = fit_full_model(&dataset(&samples, set, &table)?, set, &params, cfg.seed).map_err(data)?;
        importance.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name)));
        for (rank, imp) in importance.iter().enumerate() {
            w.write_record([
                set.tag().to_string(),
                imp.name.clone(),
                imp.score.to_string(),
                imp.se.to_string(),
                (rank + 1).to_string(),
            ])
            .map_err(data)?;
        }
    }
    write_file(&dir.join("importance.csv"), w.into_inner().map_err(data)?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["variable", "spearman_rho"]).map_err(data)?;
    for (name, rho) in pipeline::predictor_correlations(&samples) {
        if rho.is_none() {
            log::warn!("variable={name} spearman undefined (constant column)");
        }
        w.write_record([name.to_string(), rho.map(|r| r.to_string()).unwrap_or_default()])
            .map_err(data)?;
    }
    write_file(&dir.join("spearman.csv"), w.into_inner().map_err(data)?)?;
    log::info!("step=report stands={} out_dir={}", samples.len(), dir.display());
    Ok(())
}
