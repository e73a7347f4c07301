//! Reader and writer for the harvested-production XML subset.
//!
//! ```text
//! HarvestedProduction[units]
//!   Machine[machineId]
//!     Object[objectId]
//!       Stem[stemId species dbh x y posSource]
//!         Log[assortment volume length?]
//! ```
//!
//! `units` is a space-separated list of `quantity:unit` pairs. Accepted
//! pairs are `dbh:cm|mm`, `volume:m3|dm3` and `length:cm|mm`; anything not
//! declared defaults to cm / m³. Elements outside the subset are skipped and
//! counted in [`ParseReport::ignored_elements`].

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use roxmltree::{Document, Node};

use super::{Assortment, HarvestObject, IngestError, LogProduct, PositionSource, Species, StemRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub ignored_elements: usize,
}

#[derive(Debug, Clone, Copy)]
struct Units {
    dbh_to_cm: f64,
    volume_to_m3: f64,
    length_to_cm: f64,
}

impl Units {
    fn parse(decl: Option<&str>) -> Result<Units, IngestError> {
        let mut units = Units {
            dbh_to_cm: 1.0,
            volume_to_m3: 1.0,
            length_to_cm: 1.0,
        };
        let Some(decl) = decl else {
            return Ok(units);
        };
        let mut seen = HashSet::new();
        for pair in decl.split_whitespace() {
            let (quantity, unit) = pair
                .split_once(':')
                .ok_or_else(|| schema(format!("units entry `{pair}` is not quantity:unit")))?;
            if !seen.insert(quantity) {
                return Err(schema(format!("units declares `{quantity}` twice")));
            }
            match (quantity, unit) {
                ("dbh", "cm") => units.dbh_to_cm = 1.0,
                ("dbh", "mm") => units.dbh_to_cm = 0.1,
                ("volume", "m3") => units.volume_to_m3 = 1.0,
                ("volume", "dm3") => units.volume_to_m3 = 1e-3,
                ("length", "cm") => units.length_to_cm = 1.0,
                ("length", "mm") => units.length_to_cm = 0.1,
                _ => return Err(schema(format!("unsupported unit `{pair}`"))),
            }
        }
        Ok(units)
    }
}

fn schema(msg: impl Into<String>) -> IngestError {
    IngestError::Schema(msg.into())
}

pub fn parse_hpr(xml: &[u8]) -> Result<HarvestObject, IngestError> {
    let (object, report) = parse_hpr_with_report(xml)?;
    if report.ignored_elements > 0 {
        log::warn!(
            "object={} ignored_elements={}",
            object.object_id,
            report.ignored_elements
        );
    }
    Ok(object)
}

pub fn read_hpr(path: impl AsRef<Path>) -> Result<HarvestObject, IngestError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_hpr(&bytes)
}

pub fn parse_hpr_with_report(xml: &[u8]) -> Result<(HarvestObject, ParseReport), IngestError> {
    let text = std::str::from_utf8(xml).map_err(|e| {
        let (line, column) = line_col(&xml[..e.valid_up_to()]);
        IngestError::Parse {
            line,
            column,
            message: "invalid UTF-8".into(),
        }
    })?;
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        IngestError::Parse {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;

    let mut report = ParseReport::default();
    let root = doc.root_element();
    if root.tag_name().name() != "HarvestedProduction" {
        return Err(schema(format!(
            "root element is `{}`, expected HarvestedProduction",
            root.tag_name().name()
        )));
    }
    let units = Units::parse(root.attribute("units"))?;

    let machine = single_child(root, "Machine", &mut report)?;
    let machine_id = required(machine, "machineId", "Machine")?.to_string();
    let obj = single_child(machine, "Object", &mut report)?;
    let object_id = required(obj, "objectId", "Object")?.to_string();

    let mut stems = Vec::new();
    let mut ids = HashSet::new();
    for node in obj.children().filter(Node::is_element) {
        if node.tag_name().name() != "Stem" {
            report.ignored_elements += count_elements(node);
            continue;
        }
        let stem = parse_stem(node, units, &mut report)?;
        if !ids.insert(stem.stem_id.clone()) {
            return Err(schema(format!("duplicate stemId `{}`", stem.stem_id)));
        }
        stems.push(stem);
    }

    Ok((
        HarvestObject {
            object_id,
            machine_id,
            stems,
        },
        report,
    ))
}

fn parse_stem(node: Node, units: Units, report: &mut ParseReport) -> Result<StemRecord, IngestError> {
    let stem_id = required(node, "stemId", "Stem")?.to_string();
    let ctx = format!("Stem `{stem_id}`");
    let species = required(node, "species", &ctx)?;
    if species.trim().is_empty() {
        return Err(schema(format!("{ctx}: empty species")));
    }
    let dbh = number(node, "dbh", &ctx)? * units.dbh_to_cm;
    let (x, y) = match (node.attribute("x"), node.attribute("y")) {
        (Some(_), Some(_)) => (number(node, "x", &ctx)?, number(node, "y", &ctx)?),
        _ => return Err(schema(format!("{ctx}: missing position"))),
    };
    let pos = required(node, "posSource", &ctx)?;
    let position_source = PositionSource::from_code(pos)
        .ok_or_else(|| schema(format!("{ctx}: unknown posSource `{pos}`")))?;

    let mut products = Vec::new();
    for log in node.children().filter(Node::is_element) {
        if log.tag_name().name() != "Log" {
            report.ignored_elements += count_elements(log);
            continue;
        }
        let code = required(log, "assortment", &ctx)?;
        let assortment = Assortment::from_code(code)
            .ok_or_else(|| schema(format!("{ctx}: unknown assortment `{code}`")))?;
        let volume_m3 = number(log, "volume", &ctx)? * units.volume_to_m3;
        let length_cm = match log.attribute("length") {
            Some(_) => Some(number(log, "length", &ctx)? * units.length_to_cm),
            None => None,
        };
        products.push(LogProduct {
            assortment,
            volume_m3,
            length_cm,
        });
    }
    if products.is_empty() {
        return Err(schema(format!("{ctx}: no Log products")));
    }

    Ok(StemRecord {
        stem_id,
        species: Species::parse(species),
        dbh_cm: dbh,
        x,
        y,
        position_source,
        products,
    })
}

fn single_child<'a, 'i>(
    parent: Node<'a, 'i>,
    name: &str,
    report: &mut ParseReport,
) -> Result<Node<'a, 'i>, IngestError> {
    let mut found = None;
    for child in parent.children().filter(Node::is_element) {
        if child.tag_name().name() == name {
            if found.is_some() {
                return Err(schema(format!(
                    "more than one {name} in {}",
                    parent.tag_name().name()
                )));
            }
            found = Some(child);
        } else {
            report.ignored_elements += count_elements(child);
        }
    }
    found.ok_or_else(|| schema(format!("missing {name} in {}", parent.tag_name().name())))
}

fn count_elements(node: Node) -> usize {
    node.descendants().filter(Node::is_element).count()
}

fn required<'a>(node: Node<'a, '_>, attr: &str, ctx: &str) -> Result<&'a str, IngestError> {
    node.attribute(attr)
        .ok_or_else(|| schema(format!("{ctx}: missing attribute `{attr}`")))
}

fn number(node: Node, attr: &str, ctx: &str) -> Result<f64, IngestError> {
    let raw = required(node, attr, ctx)?;
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| schema(format!("{ctx}: `{attr}` is not a number: `{raw}`")))?;
    if !v.is_finite() {
        return Err(schema(format!("{ctx}: `{attr}` is not finite")));
    }
    Ok(v)
}

fn line_col(prefix: &[u8]) -> (u32, u32) {
    let line = prefix.iter().filter(|&&b| b == b'\n').count() as u32 + 1;
    let col = prefix.iter().rev().take_while(|&&b| b != b'\n').count() as u32 + 1;
    (line, col)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Serialize in canonical units (cm, m³). Numbers use the shortest
/// representation that reparses to the same `f64`.
pub fn write_hpr(object: &HarvestObject) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<HarvestedProduction units=\"dbh:cm volume:m3 length:cm\">\n");
    let _ = writeln!(s, "  <Machine machineId=\"{}\">", escape(&object.machine_id));
    let _ = writeln!(s, "    <Object objectId=\"{}\">", escape(&object.object_id));
    for stem in &object.stems {
        let _ = writeln!(
            s,
            "      <Stem stemId=\"{}\" species=\"{}\" dbh=\"{}\" x=\"{}\" y=\"{}\" posSource=\"{}\">",
            escape(&stem.stem_id),
            escape(stem.species.label()),
            stem.dbh_cm,
            stem.x,
            stem.y,
            stem.position_source.code()
        );
        for p in &stem.products {
            let _ = write!(
                s,
                "        <Log assortment=\"{}\" volume=\"{}\"",
                p.assortment.code(),
                p.volume_m3
            );
            if let Some(len) = p.length_cm {
                let _ = write!(s, " length=\"{len}\"");
            }
            s.push_str("/>\n");
        }
        s.push_str("      </Stem>\n");
    }
    s.push_str("    </Object>\n  </Machine>\n</HarvestedProduction>\n");
    s
}
