//! Python bindings: `import rotmap`.

use std::collections::HashMap;
use std::fmt::Display;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use rotmap::evalmap::{self, fit_full_model, CvReport};
use rotmap::geom::{alpha_shape, delaunay_triangulate, GeomError, Point};
use rotmap::grid::RasterManifest;
use rotmap::learn::{self, CalibratedForest, Dataset};
use rotmap::pipeline;
use rotmap::stands::{self, read_segments, StandSample, VariableSet, PREDICTORS};
use rotmap::synthgen::{self, ScenarioConfig};

create_exception!(rotmap, RotmapError, PyException);

fn err(e: impl Display) -> PyErr {
    RotmapError::new_err(e.to_string())
}

fn points(coords: Vec<(f64, f64)>) -> Vec<Point> {
    coords.into_iter().map(|(x, y)| Point::new(x, y)).collect()
}

fn variable_set(vars: &str) -> PyResult<VariableSet> {
    VariableSet::parse(vars).ok_or_else(|| PyValueError::new_err(format!("vars must be 'all' or 'prior', got {vars:?}")))
}

#[pyclass(name = "Metrics", module = "rotmap", frozen, get_all, skip_from_py_object)]
#[derive(Clone)]
struct PyMetrics {
    n: usize,
    mean_obs: f64,
    rmse: f64,
    md: f64,
    rmse_pct: Option<f64>,
    md_pct: Option<f64>,
    pseudo_r2: f64,
}

impl From<evalmap::MetricsReport> for PyMetrics {
    fn from(m: evalmap::MetricsReport) -> Self {
        PyMetrics {
            n: m.n,
            mean_obs: m.mean_obs,
            rmse: m.rmse,
            md: m.md,
            rmse_pct: m.rmse_pct,
            md_pct: m.md_pct,
            pseudo_r2: m.pseudo_r2,
        }
    }
}

#[pymethods]
impl PyMetrics {
    fn __repr__(&self) -> String {
        format!(
            "Metrics(n={}, rmse={:.4}, md={:.4}, pseudo_r2={:.4})",
            self.n, self.rmse, self.md, self.pseudo_r2
        )
    }
}

/// RMSE, mean deviance and pseudo-R² of paired observations.
#[pyfunction]
fn compute_metrics(observed: Vec<f64>, predicted: Vec<f64>) -> PyResult<PyMetrics> {
    evalmap::compute_metrics(&observed, &predicted).map(Into::into).map_err(err)
}

/// Triangles of the Delaunay triangulation, as coordinate triples.
#[pyfunction]
fn delaunay(coords: Vec<(f64, f64)>) -> PyResult<Vec<[(f64, f64); 3]>> {
    let tri = delaunay_triangulate(&points(coords)).map_err(err)?;
    Ok((0..tri.len())
        .map(|t| tri.triangle_points(t).map(|p| (p.x, p.y)))
        .collect())
}

/// Area of the alpha shape (circumradius threshold `alpha`); 0 when empty.
#[pyfunction]
fn alpha_shape_area(coords: Vec<(f64, f64)>, alpha: f64) -> PyResult<f64> {
    match alpha_shape(&points(coords), alpha) {
        Ok(shape) => Ok(shape.area()),
        Err(GeomError::EmptyShape) => Ok(0.0),
        Err(e) => Err(err(e)),
    }
}

#[pyfunction]
fn spearman(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    learn::spearman_rho(&x, &y).map_err(err)
}

#[pyclass(name = "PipelineConfig", module = "rotmap", skip_from_py_object)]
#[derive(Clone, Default)]
struct PyConfig {
    inner: pipeline::PipelineConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        toml::from_str(text).map(|inner| PyConfig { inner }).map_err(err)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[setter]
    fn set_alpha(&mut self, v: f64) {
        self.inner.alpha = v;
    }
    #[getter]
    fn buffer_m(&self) -> f64 {
        self.inner.buffer_m
    }
    #[setter]
    fn set_buffer_m(&mut self, v: f64) {
        self.inner.buffer_m = v;
    }
    #[getter]
    fn min_area_ha(&self) -> f64 {
        self.inner.min_area_ha
    }
    #[setter]
    fn set_min_area_ha(&mut self, v: f64) {
        self.inner.min_area_ha = v;
    }
    #[getter]
    fn min_stems(&self) -> usize {
        self.inner.min_stems
    }
    #[setter]
    fn set_min_stems(&mut self, v: usize) {
        self.inner.min_stems = v;
    }
    #[getter]
    fn min_spruce_pct(&self) -> f64 {
        self.inner.min_spruce_pct
    }
    #[setter]
    fn set_min_spruce_pct(&mut self, v: f64) {
        self.inner.min_spruce_pct = v;
    }
    #[getter]
    fn ntree(&self) -> usize {
        self.inner.ntree
    }
    #[setter]
    fn set_ntree(&mut self, v: usize) {
        self.inner.ntree = v;
    }
    #[getter]
    fn nodesize(&self) -> usize {
        self.inner.nodesize
    }
    #[setter]
    fn set_nodesize(&mut self, v: usize) {
        self.inner.nodesize = v;
    }
    #[getter]
    fn k(&self) -> Option<usize> {
        self.inner.k
    }
    #[setter]
    fn set_k(&mut self, v: Option<usize>) {
        self.inner.k = v;
    }
    #[getter]
    fn min_cluster(&self) -> usize {
        self.inner.min_cluster
    }
    #[setter]
    fn set_min_cluster(&mut self, v: usize) {
        self.inner.min_cluster = v;
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
    #[setter]
    fn set_seed(&mut self, v: u64) {
        self.inner.seed = v;
    }
}

fn config_or_default(config: Option<PyRef<'_, PyConfig>>) -> pipeline::PipelineConfig {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

/// Stand-level modeling table: response `br_vol` and the named predictors.
#[pyclass(name = "StandTable", module = "rotmap", skip_from_py_object)]
#[derive(Clone)]
struct PyStandTable {
    samples: Vec<StandSample>,
}

#[pymethods]
impl PyStandTable {
    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let file = File::open(&path).map_err(|e| err(format!("{}: {e}", path.display())))?;
        let samples = stands::read_stand_table(BufReader::new(file)).map_err(err)?;
        Ok(PyStandTable { samples })
    }

    fn write(&self, path: PathBuf) -> PyResult<()> {
        let mut buf = Vec::new();
        stands::write_stand_table(&mut buf, &self.samples).map_err(err)?;
        std::fs::write(&path, buf).map_err(|e| err(format!("{}: {e}", path.display())))
    }

    fn __len__(&self) -> usize {
        self.samples.len()
    }

    #[getter]
    fn stand_ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.stand_id.clone()).collect()
    }

    #[getter]
    fn br_vol(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.br_vol).collect()
    }

    #[staticmethod]
    fn predictors() -> Vec<&'static str> {
        PREDICTORS.to_vec()
    }

    fn column(&self, name: &str) -> PyResult<Vec<f64>> {
        if !PREDICTORS.contains(&name) {
            return Err(PyValueError::new_err(format!("unknown predictor {name}")));
        }
        Ok(self.samples.iter().map(|s| s.get(name).unwrap()).collect())
    }

    /// Spearman ρ of each numeric predictor with the response; None where
    /// the column is constant.
    fn correlations(&self) -> Vec<(&'static str, Option<f64>)> {
        pipeline::predictor_correlations(&self.samples)
    }
}

/// Ingest production files, delineate stands and assemble the stand table.
#[pyfunction]
#[pyo3(signature = (hpr_files, segments, rasters, config=None))]
fn build_stand_table(
    hpr_files: Vec<PathBuf>,
    segments: PathBuf,
    rasters: PathBuf,
    config: Option<PyRef<'_, PyConfig>>,
) -> PyResult<PyStandTable> {
    let cfg = config_or_default(config);
    let ingested = pipeline::ingest(&hpr_files, cfg.seed).map_err(err)?;
    let manifest = RasterManifest::load(&rasters).map_err(err)?;
    let (frame, grids) = manifest.load_layers(&[]).map_err(err)?;
    let segments = read_segments(&segments).map_err(err)?;
    let d = pipeline::delineate(&ingested.trees, &segments, &frame, &cfg).map_err(err)?;
    let (samples, _) = pipeline::features(&d.stands, &ingested.trees, &grids, &frame, &cfg).map_err(err)?;
    Ok(PyStandTable { samples })
}

/// Calibrated random forest.
#[pyclass(name = "Model", module = "rotmap", skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: CalibratedForest,
}

#[pymethods]
impl PyModel {
    /// Fit on every stand of `table`; `vars` is "all" or "prior".
    #[staticmethod]
    #[pyo3(signature = (table, vars="prior", config=None))]
    fn train(table: &PyStandTable, vars: &str, config: Option<PyRef<'_, PyConfig>>) -> PyResult<Self> {
        let cfg = config_or_default(config);
        let set = variable_set(vars)?;
        let data = Dataset::from_samples(&table.samples, set).map_err(err)?;
        let (inner, _) = fit_full_model(&data, set, &cfg.forest(), cfg.seed).map_err(err)?;
        Ok(PyModel { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        learn::model_from_json(text).map(|inner| PyModel { inner }).map_err(err)
    }

    fn to_json(&self) -> String {
        learn::model_to_json(&self.inner)
    }

    #[getter]
    fn variable_set(&self) -> &'static str {
        self.inner.variable_set.tag()
    }

    #[getter]
    fn variables(&self) -> Vec<String> {
        self.inner.forest.names().into_iter().map(str::to_string).collect()
    }

    /// `(a, b)` of the correction `a + b·raw`.
    #[getter]
    fn calibration(&self) -> (f64, f64) {
        (self.inner.calibration.a, self.inner.calibration.b)
    }

    /// Calibrated prediction for one stand given as `{name: value}`.
    fn predict(&self, values: HashMap<String, f64>) -> PyResult<f64> {
        let row = self
            .inner
            .forest
            .names()
            .iter()
            .map(|n| values.get(*n).copied().ok_or_else(|| PyValueError::new_err(format!("missing predictor {n}"))))
            .collect::<PyResult<Vec<f64>>>()?;
        Ok(self.inner.predict(&row))
    }

    /// Calibrated predictions for every stand of a table.
    fn predict_table(&self, table: &PyStandTable) -> PyResult<Vec<f64>> {
        let data = Dataset::from_samples(&table.samples, self.inner.variable_set).map_err(err)?;
        Ok(data.rows.iter().map(|r| self.inner.predict(r)).collect())
    }
}

#[pyclass(name = "CvResult", module = "rotmap", frozen)]
struct PyCvResult {
    report: CvReport,
}

#[pymethods]
impl PyCvResult {
    #[getter]
    fn strategy(&self) -> &'static str {
        self.report.strategy.name()
    }

    #[getter]
    fn metrics(&self) -> PyMetrics {
        self.report.metrics.clone().into()
    }

    /// `(stand_id, fold_id, observed, predicted)` per stand.
    #[getter]
    fn records(&self) -> Vec<(String, usize, f64, f64)> {
        self.report
            .records
            .iter()
            .map(|r| (r.stand_id.clone(), r.fold_id, r.observed, r.predicted))
            .collect()
    }

    /// `(variable, score, se)` from the full-data model.
    #[getter]
    fn importance(&self) -> Vec<(String, f64, f64)> {
        self.report.importance.iter().map(|i| (i.name.clone(), i.score, i.se)).collect()
    }

    fn to_json(&self) -> String {
        self.report.to_json()
    }
}

/// Leave-one-stand-out (`"stand"`) or leave-one-cluster-out (`"cluster"`)
/// cross-validation.
#[pyfunction]
#[pyo3(signature = (table, strategy="stand", vars="all", config=None))]
fn cross_validate(
    table: &PyStandTable,
    strategy: &str,
    vars: &str,
    config: Option<PyRef<'_, PyConfig>>,
) -> PyResult<PyCvResult> {
    let cfg = config_or_default(config);
    let set = variable_set(vars)?;
    let report = match strategy {
        "stand" => evalmap::leave_stand_out_cv(&table.samples, set, &cfg.forest(), cfg.seed).map_err(err)?,
        "cluster" => {
            let clusters = pipeline::stand_clusters(&table.samples, &cfg).map_err(err)?;
            evalmap::leave_cluster_out_cv(&table.samples, &clusters, set, &cfg.forest(), cfg.seed).map_err(err)?
        }
        other => return Err(PyValueError::new_err(format!("strategy must be 'stand' or 'cluster', got {other:?}"))),
    };
    Ok(PyCvResult { report })
}

/// Paths of a generated scenario, relative to its directory.
#[pyclass(name = "Scenario", module = "rotmap", frozen, get_all)]
struct PyScenario {
    directory: PathBuf,
    harvester: Vec<PathBuf>,
    rasters: PathBuf,
    segments: PathBuf,
    truth: PathBuf,
    n_stands: usize,
    mean_br_vol: f64,
}

/// Write a synthetic scenario below `out_dir`.
#[pyfunction]
#[pyo3(signature = (out_dir, seed=1, n_clusters=None, stands_per_cluster=None, cluster_effect_sd=None))]
fn generate_scenario(
    out_dir: PathBuf,
    seed: u64,
    n_clusters: Option<usize>,
    stands_per_cluster: Option<usize>,
    cluster_effect_sd: Option<f64>,
) -> PyResult<PyScenario> {
    let mut config = ScenarioConfig::default();
    if let Some(n) = n_clusters {
        config.n_clusters = n;
    }
    if let Some(n) = stands_per_cluster {
        config.stands_per_cluster = n;
    }
    if let Some(sd) = cluster_effect_sd {
        config.cluster_effect_sd = sd;
    }
    let (m, truth) = synthgen::generate_scenario(&config, &out_dir, seed).map_err(err)?;
    let mean_br_vol = truth.iter().map(|t| t.br_vol).sum::<f64>() / truth.len().max(1) as f64;
    Ok(PyScenario {
        directory: out_dir,
        harvester: m.harvester,
        rasters: m.rasters,
        segments: m.segments,
        truth: m.truth,
        n_stands: truth.len(),
        mean_br_vol,
    })
}

#[pymodule]
#[pyo3(name = "rotmap")]
fn rotmap_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RotmapError", m.py().get_type::<RotmapError>())?;
    m.add_class::<PyMetrics>()?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyStandTable>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyCvResult>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(compute_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(delaunay, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_shape_area, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(build_stand_table, m)?)?;
    m.add_function(wrap_pyfunction!(cross_validate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scenario, m)?)?;
    Ok(())
}
