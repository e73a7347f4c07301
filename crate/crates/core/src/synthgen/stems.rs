use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use super::layout::{Plot, PlotKind};
use super::{ScenarioConfig, SynthError, TruthRecord};
use crate::grid::GridFrame;
use crate::harvester::{
    Assortment, HarvestObject, LogProduct, PositionSource, Species, StemRecord, JITTER_HALF_WIDTH_M,
};
use crate::seeds;

/// Lowest spruce share of stems drawn for a harvested stand.
pub(crate) const MIN_STAND_SPRUCE: f64 = 0.62;
const DBH_SIGMA: f64 = 0.25;
const STRIP_ROAD_SPACING_M: f64 = 20.0;
const LOGIT_RANGE: f64 = 40.0;

struct DraftStem {
    id: String,
    species: Species,
    dbh: f64,
    x: f64,
    y: f64,
    source: PositionSource,
    /// Volume before scaling to the target stand volume.
    raw_volume: f64,
}

struct DraftStand<'a> {
    plot: &'a Plot,
    stems: Vec<DraftStem>,
}

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn draft_stand<'a>(config: &ScenarioConfig, plot: &'a Plot, rng: &mut impl Rng) -> DraftStand<'a> {
    let (mean, sd) = (config.stems_per_ha_mean, config.stems_per_ha_sd);
    let density = (mean + sd * normal(rng)).clamp(mean - 2.0 * sd, mean + 2.0 * sd);
    let fp = plot.footprint;
    let area_m2 = (fp.max.x - fp.min.x) * (fp.max.y - fp.min.y);
    let n = (density * area_m2 / 1e4).round() as usize;

    let z_maturity = (plot.maturity - 0.5) / 0.2887;
    let qmd = (config.qmd_cm + config.qmd_sd_cm * (0.7 * z_maturity + 0.714 * normal(rng)))
        .clamp((config.qmd_cm - 2.5 * config.qmd_sd_cm).max(10.0), config.qmd_cm + 3.0 * config.qmd_sd_cm);

    let reach = JITTER_HALF_WIDTH_M + 0.01;
    let stems = (0..n)
        .map(|k| {
            let dbh = round_to((qmd * (DBH_SIGMA * normal(rng) - DBH_SIGMA * DBH_SIGMA).exp()).max(6.0), 0.1);
            let species = if rng.random::<f64>() < plot.spruce_share {
                Species::Spruce
            } else if rng.random::<f64>() < 0.6 {
                Species::Pine
            } else {
                Species::Birch
            };
            let tx = rng.random_range(fp.min.x + 0.01..fp.max.x - 0.01);
            let ty = rng.random_range(fp.min.y + 0.01..fp.max.y - 0.01);
            let (source, x, y) = if rng.random::<f64>() < config.head_position_share {
                (PositionSource::Head, tx, ty)
            } else {
                // machine on the nearest strip road, within reach of the tree
                let road = ((ty - fp.min.y - STRIP_ROAD_SPACING_M / 2.0) / STRIP_ROAD_SPACING_M).round().max(0.0);
                let my = fp.min.y + STRIP_ROAD_SPACING_M / 2.0 + road * STRIP_ROAD_SPACING_M;
                (
                    PositionSource::Machine,
                    tx.clamp(fp.min.x + reach, fp.max.x - reach),
                    my.clamp(fp.min.y + reach, fp.max.y - reach),
                )
            };
            DraftStem {
                id: format!("{:05}", k + 1),
                species,
                dbh,
                x: round_to(x, 0.01),
                y: round_to(y, 0.01),
                source,
                raw_volume: dbh.powf(2.5),
            }
        })
        .collect();
    DraftStand { plot, stems }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Root of an increasing function by bisection.
fn solve_increasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Cut products from butt to top. `br_share` of the volume is graded as
/// damaged: a short cut-off, then a damaged pulpwood or energy log.
fn cut_products(volume: f64, dbh: f64, br_share: f64) -> Vec<LogProduct> {
    let vol = |v: f64| round_to(v, 1e-4).max(1e-4);
    let log = |assortment, v: f64, len: Option<f64>| LogProduct {
        assortment,
        volume_m3: vol(v),
        length_cm: len,
    };
    let mut out = Vec::new();
    let br = volume * br_share;
    if br > 0.0 {
        out.push(log(Assortment::BrCutoff, 0.12 * br, Some(40.0)));
        let grade = if dbh >= 10.0 { Assortment::BrPulpwood } else { Assortment::BrEnergyWood };
        out.push(log(grade, 0.88 * br, Some(300.0)));
    }
    let sound = volume - br;
    if dbh >= 18.0 {
        out.push(log(Assortment::Sawlog, 0.72 * sound, Some(490.0)));
        out.push(log(Assortment::Pulpwood, 0.23 * sound, Some(340.0)));
        out.push(log(Assortment::EnergyWood, 0.05 * sound, None));
    } else if dbh >= 10.0 {
        out.push(log(Assortment::Pulpwood, 0.9 * sound, Some(340.0)));
        out.push(log(Assortment::EnergyWood, 0.1 * sound, None));
    } else {
        out.push(log(Assortment::EnergyWood, sound, None));
    }
    out
}

pub(crate) fn generate(
    config: &ScenarioConfig,
    _frame: &GridFrame,
    plots: &[Plot],
    seed: u64,
) -> Result<(Vec<HarvestObject>, Vec<TruthRecord>), SynthError> {
    let drafts: Vec<DraftStand> = plots
        .iter()
        .enumerate()
        .filter(|(_, p)| p.kind == PlotKind::Harvested)
        .map(|(i, p)| draft_stand(config, p, &mut seeds::stream(seed, "stems", i as u64)))
        .collect();

    let raw_per_ha: f64 = drafts
        .iter()
        .map(|d| d.stems.iter().map(|s| s.raw_volume).sum::<f64>() / d.plot.cell_area_ha())
        .sum::<f64>()
        / drafts.len() as f64;
    let scale = config.volume_m3ha / raw_per_ha;

    let rot = &config.rot;
    let infecting = rot.base_rate > 0.0 && config.br_vol_m3ha > 0.0;
    let base = if infecting { (rot.base_rate / (1.0 - rot.base_rate)).ln() } else { 0.0 };
    let logits: Vec<Vec<Option<f64>>> = drafts
        .iter()
        .map(|d| {
            d.stems
                .iter()
                .map(|s| {
                    (s.species == Species::Spruce).then_some({
                        base + rot.dbh_coef * (s.dbh - config.qmd_cm) + rot.maturity_coef * (d.plot.maturity - 0.5)
                    })
                })
                .collect()
        })
        .collect();
    let expected = |si: usize, shift: f64| -> f64 {
        let d = &drafts[si];
        d.stems
            .iter()
            .zip(&logits[si])
            .filter_map(|(s, l)| l.map(|l| sigmoid(l + shift) * rot.br_fraction_mean * scale * s.raw_volume))
            .sum::<f64>()
            / d.plot.cell_area_ha()
    };
    let mean_expected = |shift: f64| (0..drafts.len()).map(|i| expected(i, shift)).sum::<f64>() / drafts.len() as f64;

    let mut effect_rng = seeds::stream(seed, "cluster_effect", 0);
    let mut effects: Vec<f64> = (0..config.n_clusters)
        .map(|_| config.cluster_effect_sd * normal(&mut effect_rng))
        .collect();
    if effects.len() > 1 {
        let m = effects.iter().sum::<f64>() / effects.len() as f64;
        effects.iter_mut().for_each(|e| *e -= m);
    } else {
        effects[0] = 0.0;
    }

    let shifts: Vec<Option<f64>> = if infecting {
        if mean_expected(LOGIT_RANGE) < config.br_vol_m3ha {
            return Err(SynthError::Config(format!(
                "br_vol_m3ha {} exceeds what the rot model can reach ({:.1}); raise rot.br_fraction_mean",
                config.br_vol_m3ha,
                mean_expected(LOGIT_RANGE)
            )));
        }
        let global = solve_increasing(mean_expected, config.br_vol_m3ha, -LOGIT_RANGE, LOGIT_RANGE);
        (0..drafts.len())
            .map(|i| {
                let target = expected(i, global) + effects[drafts[i].plot.cluster];
                if target <= 0.0 {
                    None
                } else if target >= expected(i, LOGIT_RANGE) {
                    Some(LOGIT_RANGE)
                } else {
                    Some(solve_increasing(|s| expected(i, s), target, -LOGIT_RANGE, LOGIT_RANGE))
                }
            })
            .collect()
    } else {
        vec![None; drafts.len()]
    };

    let a = rot.br_fraction_mean * rot.br_fraction_concentration;
    let b = (1.0 - rot.br_fraction_mean) * rot.br_fraction_concentration;
    let beta = Beta::new(a, b).map_err(|e| SynthError::Config(format!("br fraction distribution: {e}")))?;

    let mut objects = Vec::with_capacity(drafts.len());
    let mut truth = Vec::with_capacity(drafts.len());
    for (si, d) in drafts.iter().enumerate() {
        let mut rng = seeds::stream(seed, "rot", si as u64);
        let stems: Vec<StemRecord> = d
            .stems
            .iter()
            .zip(&logits[si])
            .map(|(s, logit)| {
                let p = match (logit, shifts[si]) {
                    (Some(l), Some(shift)) => sigmoid(l + shift),
                    _ => 0.0,
                };
                let share = if rng.random::<f64>() < p { beta.sample(&mut rng) } else { 0.0 };
                StemRecord {
                    stem_id: s.id.clone(),
                    species: s.species.clone(),
                    dbh_cm: s.dbh,
                    x: s.x,
                    y: s.y,
                    position_source: s.source,
                    products: cut_products(scale * s.raw_volume, s.dbh, share),
                }
            })
            .collect();
        let object_id = d.plot.object_id.clone().expect("harvested plot");
        let total: f64 = stems.iter().map(StemRecord::total_volume).sum();
        let spruce: f64 = stems
            .iter()
            .filter(|s| s.species == Species::Spruce)
            .map(StemRecord::total_volume)
            .sum();
        let br: f64 = stems.iter().map(StemRecord::br_volume).sum();
        let area = d.plot.cell_area_ha();
        truth.push(TruthRecord {
            stand_id: d.plot.stand_id().expect("harvested plot"),
            object_id: object_id.clone(),
            segment_id: d.plot.segment_id.clone(),
            cluster: d.plot.cluster,
            maturity: d.plot.maturity,
            cluster_effect: effects[d.plot.cluster],
            n_stems: stems.len(),
            area_ha: area,
            total_vol_m3: total,
            spruce_vol_m3: spruce,
            br_vol_m3: br,
            br_vol: br / area,
        });
        objects.push(HarvestObject {
            object_id,
            machine_id: format!("H{:02}", d.plot.cluster + 1),
            stems,
        });
    }
    Ok((objects, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_conserve_volume_and_damage() {
        let p = cut_products(0.5, 24.0, 0.3);
        let total: f64 = p.iter().map(|l| l.volume_m3).sum();
        let br: f64 = p.iter().filter(|l| l.assortment.is_br()).map(|l| l.volume_m3).sum();
        assert!((total - 0.5).abs() < 5e-4);
        assert!((br - 0.15).abs() < 2e-4);
        assert_eq!(p[0].assortment, Assortment::BrCutoff);
        assert!(cut_products(0.01, 7.0, 0.0).iter().all(|l| l.volume_m3 > 0.0 && !l.assortment.is_br()));
    }

    #[test]
    fn bisection_finds_root() {
        let r = solve_increasing(|x| x * x * x, 8.0, -10.0, 10.0);
        assert!((r - 2.0).abs() < 1e-9);
    }
}
