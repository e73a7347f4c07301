use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::layer_kind;
use super::layout::Plot;
use super::ScenarioConfig;
use crate::grid::{Grid, GridFrame, GridKind};
use crate::seeds;
use crate::stands::{RASTER_PREDICTORS, SPRUCE_SHARE_LAYER};

const N_LAYERS: usize = 16;
const SITE_INDEX: [f64; 6] = [8.0, 11.0, 14.0, 17.0, 20.0, 23.0];
const TREE_TYPES: [f64; 3] = [31.0, 32.0, 33.0];
const GROUND_CLASSES: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
const SOIL_CLASSES: [f64; 5] = [11.0, 12.0, 13.0, 21.0, 22.0];
/// Share of cells in a segment carrying a random category instead of the
/// segment's own.
const CATEGORY_NOISE: f64 = 0.1;

fn layer_names() -> [&'static str; N_LAYERS] {
    let mut out = [SPRUCE_SHARE_LAYER; N_LAYERS];
    out[..15].copy_from_slice(&RASTER_PREDICTORS);
    out
}

/// Per-cell noise sd and rounding step of each layer, in [`layer_names`] order.
const CELL_NOISE: [(f64, f64); N_LAYERS] = [
    (0.3, 0.01),
    (0.5, 0.01),
    (0.3, 0.01),
    (0.3, 0.01),
    (0.02, 0.001),
    (40.0, 0.1),
    (2.0, 0.1),
    (0.8, 0.01),
    (3.0, 0.1),
    (3.0, 0.1),
    (5.0, 0.1),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (2.0, 0.1),
];

#[derive(Clone, Copy)]
struct Env {
    altitude: f64,
    slope: f64,
    site: usize,
    ground: f64,
    soil: f64,
}

/// Layer values of a forest patch; `eps` supplies standard normal draws
/// for patch-level scatter.
fn attributes(maturity: f64, spruce: f64, env: Env, east_m: f64, eps: &mut dyn FnMut() -> f64) -> [f64; N_LAYERS] {
    let h95 = (12.5 + 13.0 * maturity + 0.8 * eps()).max(1.0);
    let hmean = (0.7 * h95 + 0.5 * eps()).max(0.5);
    let h25 = (0.45 * h95 + 0.5 * eps()).max(0.2);
    let hvar = ((0.22 * h95).powi(2) + 0.5 * eps()).abs();
    let d2 = (0.55 + 0.35 * maturity + 0.05 * eps()).clamp(0.02, 0.99);
    let nir = 2600.0 - 700.0 * maturity + 120.0 * eps();
    let altitude = (env.altitude + 20.0 * eps()).max(5.0);
    let slope = (env.slope + 3.0 * eps()).max(0.0);
    let temp_sum = 1550.0 - 1.2 * altitude + 15.0 * eps();
    let precip = 700.0 + 0.9 * altitude + 30.0 * eps();
    let coast = 3000.0 + 2.0 * east_m + 50.0 * eps();
    let tree_type = if spruce >= 0.7 {
        TREE_TYPES[0]
    } else if spruce < 0.4 {
        TREE_TYPES[1]
    } else {
        TREE_TYPES[2]
    };
    [
        hmean,
        hvar,
        h25,
        h95,
        d2,
        nir,
        altitude,
        slope,
        temp_sum,
        precip,
        coast,
        SITE_INDEX[env.site],
        tree_type,
        env.ground,
        env.soil,
        (100.0 * spruce + 5.0 * eps()).clamp(0.0, 100.0),
    ]
}

fn unit(seed: u64, label: &str, index: u64) -> f64 {
    (seeds::derive(seed, label, index) >> 11) as f64 / (1u64 << 53) as f64
}

pub(crate) fn render(config: &ScenarioConfig, frame: &GridFrame, plots: &[Plot], seed: u64) -> BTreeMap<String, Grid> {
    let envs: Vec<Env> = (0..config.n_clusters)
        .map(|c| {
            let mut rng = seeds::stream(seed, "environment", c as u64);
            Env {
                altitude: rng.random_range(150.0..650.0),
                slope: rng.random_range(3.0..18.0),
                site: rng.random_range(1..SITE_INDEX.len() - 1),
                ground: GROUND_CLASSES[rng.random_range(0..GROUND_CLASSES.len())],
                soil: SOIL_CLASSES[rng.random_range(0..SOIL_CLASSES.len())],
            }
        })
        .collect();

    let patch: Vec<[f64; N_LAYERS]> = plots
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = seeds::stream(seed, "patch", i as u64);
            let mut env = envs[p.cluster];
            let step: i64 = rng.random_range(-1..=1);
            env.site = (env.site as i64 + step).clamp(0, SITE_INDEX.len() as i64 - 1) as usize;
            if rng.random::<f64>() < 0.3 {
                env.soil = SOIL_CLASSES[rng.random_range(0..SOIL_CLASSES.len())];
            }
            let mut eps = || rng.sample::<f64, _>(StandardNormal);
            attributes(p.maturity, p.spruce_share, env, p.center().x - frame.xll, &mut eps)
        })
        .collect();

    let background = |row: usize, col: usize| -> [f64; N_LAYERS] {
        let c = frame.cell_center(row, col);
        let (east, north) = (c.x - frame.xll, c.y - frame.yll);
        let idx = (row * frame.ncols + col) as u64;
        let env = Env {
            altitude: 400.0 + 150.0 * (east / 900.0).sin() + 120.0 * (north / 700.0).cos(),
            slope: 8.0 + 5.0 * (north / 500.0).sin(),
            site: 2,
            ground: GROUND_CLASSES[1],
            soil: SOIL_CLASSES[3],
        };
        let maturity = -0.6 + 1.6 * unit(seed, "background_maturity", idx);
        let spruce = unit(seed, "background_spruce", idx);
        attributes(maturity, spruce, env, east, &mut || 0.0)
    };
    let mut values: Vec<Vec<f64>> = (0..N_LAYERS).map(|_| Vec::with_capacity(frame.len())).collect();
    for row in 0..frame.nrows {
        for col in 0..frame.ncols {
            for (l, v) in background(row, col).into_iter().enumerate() {
                values[l].push(v);
            }
        }
    }

    let names = layer_names();
    let mut grids = BTreeMap::new();
    for (l, name) in names.iter().enumerate() {
        let kind = layer_kind(name);
        let mut rng = seeds::stream(seed, "raster", l as u64);
        let mut grid = Grid::filled(*frame, kind, 0.0);
        let (sd, step) = CELL_NOISE[l];
        let categories: &[f64] = match *name {
            "FT_AR5" => &TREE_TYPES,
            "ST_AR5" => &GROUND_CLASSES,
            "SOIL" => &SOIL_CLASSES,
            _ => &[],
        };
        let cell_value = |base: f64, rng: &mut seeds::Stream| -> f64 {
            if kind == GridKind::Categorical {
                if rng.random::<f64>() < CATEGORY_NOISE {
                    categories[rng.random_range(0..categories.len())]
                } else {
                    base
                }
            } else {
                let v = base + sd * rng.sample::<f64, _>(StandardNormal);
                let v = if *name == SPRUCE_SHARE_LAYER || *name == "D2_ALS" {
                    v.clamp(0.0, if *name == "D2_ALS" { 1.0 } else { 100.0 })
                } else {
                    v
                };
                (v / step).round() * step
            }
        };
        for (i, base) in values[l].iter().enumerate() {
            grid.values[i] = cell_value(*base, &mut rng);
        }
        for (p, attrs) in plots.iter().zip(&patch) {
            for (row, col) in segment_cells(frame, p) {
                let v = cell_value(attrs[l], &mut rng);
                grid.set(row, col, v);
            }
        }
        grids.insert(name.to_string(), grid);
    }
    grids
}

/// Cells whose centers fall inside the plot's segment rectangle.
fn segment_cells(frame: &GridFrame, plot: &Plot) -> Vec<(usize, usize)> {
    let s = plot.segment;
    let mut out = Vec::new();
    for row in 0..frame.nrows {
        let cy = frame.cell_center(row, 0).y;
        if cy <= s.min.y || cy >= s.max.y {
            continue;
        }
        for col in 0..frame.ncols {
            let c = frame.cell_center(row, col);
            if c.x > s.min.x && c.x < s.max.x {
                out.push((row, col));
            }
        }
    }
    out
}

