use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{csv_err, expect_header, line_of, open_csv, reader_from};
use crate::model::{
    AttrKind, AttributeSchema, ExternalKnowledgeTable, GroupMember, Hierarchy, Member, PublishedRelease, QiGroup,
    Record, Region, Schema, SensitiveAttribute,
};
use crate::sug::RecordRisk;
use crate::updates::{format_decimal, format_rational, parse_rational, validate_update_model, UpdateModel};

enum AttrDef {
    Numeric(i64, i64),
    Categorical(Vec<(String, Option<String>)>),
    Sensitive(Vec<String>),
}

/// Reads `attribute,kind,value,parent` rows. Numeric attributes take one row
/// with value `lo..hi`; categorical attributes one row per hierarchy node
/// (blank parent for the root); the sensitive attribute one row per value.
pub fn parse_schema<R: Read>(input: R, path: &Path) -> Result<Schema> {
    let mut rdr = reader_from(input);
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    expect_header(path, &header, &["attribute", "kind", "value", "parent"])?;
    let mut defs: Vec<(String, AttrDef)> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = line_of(&row);
        let (name, kind, value, parent) = (&row[0], &row[1], &row[2], &row[3]);
        if name.is_empty() || value.is_empty() {
            return Err(Error::parse(path, line, "attribute and value must be non-empty"));
        }
        let pos = defs.iter().position(|(n, _)| n == name);
        match (kind, pos.map(|p| &mut defs[p].1)) {
            ("numeric", None) => {
                let bounds = value
                    .split_once("..")
                    .and_then(|(a, b)| Some((a.trim().parse::<i64>().ok()?, b.trim().parse::<i64>().ok()?)));
                let (lo, hi) = bounds.ok_or_else(|| Error::parse(path, line, format!("bad numeric range {value:?}")))?;
                defs.push((name.to_string(), AttrDef::Numeric(lo, hi)));
            }
            ("categorical", None) => {
                defs.push((name.to_string(), AttrDef::Categorical(vec![(value.to_string(), opt(parent))])));
            }
            ("categorical", Some(AttrDef::Categorical(nodes))) => nodes.push((value.to_string(), opt(parent))),
            ("sensitive", None) => defs.push((name.to_string(), AttrDef::Sensitive(vec![value.to_string()]))),
            ("sensitive", Some(AttrDef::Sensitive(values))) => values.push(value.to_string()),
            ("numeric" | "categorical" | "sensitive", Some(_)) => {
                return Err(Error::parse(path, line, format!("attribute {name:?} redefined")));
            }
            (other, _) => return Err(Error::parse(path, line, format!("unknown kind {other:?}"))),
        }
    }
    let mut qi = Vec::new();
    let mut sensitive = None;
    for (name, def) in defs {
        match def {
            AttrDef::Numeric(lo, hi) => qi.push(AttributeSchema::numeric(&name, lo, hi)?),
            AttrDef::Categorical(nodes) => qi.push(AttributeSchema::categorical(&name, Hierarchy::new(&nodes)?)),
            AttrDef::Sensitive(values) => {
                if sensitive.is_some() {
                    return Err(Error::parse(path, 0, "more than one sensitive attribute"));
                }
                sensitive = Some(SensitiveAttribute::new(&name, values)?);
            }
        }
    }
    let sensitive = sensitive.ok_or_else(|| Error::parse(path, 0, "no sensitive attribute"))?;
    Schema::new(qi, sensitive)
}

fn opt(s: &str) -> Option<String> {
    (!s.is_empty()).then(|| s.to_string())
}

pub fn load_schema(path: &Path) -> Result<Schema> {
    let file = std::fs::File::open(path).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    parse_schema(file, path)
}

pub fn write_schema<W: Write>(out: W, schema: &Schema) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["attribute", "kind", "value", "parent"])?;
    for a in &schema.qi {
        match &a.kind {
            AttrKind::Numeric { lo, hi } => w.write_record([a.name.as_str(), "numeric", &format!("{lo}..{hi}"), ""])?,
            AttrKind::Categorical(h) => {
                for n in h.nodes() {
                    let parent = n.parent.map_or("", |p| h.node_name(p));
                    w.write_record([a.name.as_str(), "categorical", n.name.as_str(), parent])?;
                }
            }
        }
    }
    for v in &schema.sensitive.values {
        w.write_record([schema.sensitive.name.as_str(), "sensitive", v.as_str(), ""])?;
    }
    w.flush()?;
    Ok(())
}

fn microdata_header(schema: &Schema) -> Vec<&str> {
    let mut h = vec!["id"];
    h.extend(schema.qi.iter().map(|a| a.name.as_str()));
    h.push(&schema.sensitive.name);
    h
}

/// Reads `id,<qi names...>,<sensitive name>` rows and validates them.
pub fn parse_microdata<R: Read>(input: R, path: &Path, schema: &Schema) -> Result<Vec<Record>> {
    let mut rdr = reader_from(input);
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    expect_header(path, &header, &microdata_header(schema))?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = line_of(&row);
        let id = &row[0];
        if id.is_empty() {
            return Err(Error::parse(path, line, "empty id"));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::parse(path, line, format!("duplicate id {id:?}")));
        }
        let mut qi = Vec::with_capacity(schema.qi.len());
        for (j, a) in schema.qi.iter().enumerate() {
            let raw = &row[j + 1];
            let v = a
                .parse_value(raw)
                .ok_or_else(|| Error::parse(path, line, format!("{} value {raw:?} outside its domain", a.name)))?;
            qi.push(v);
        }
        let raw = &row[schema.qi.len() + 1];
        let sensitive = schema
            .sensitive
            .index(raw)
            .ok_or_else(|| Error::parse(path, line, format!("unknown {} value {raw:?}", schema.sensitive.name)))?;
        out.push(Record {
            id: id.to_string(),
            qi,
            sensitive,
        });
    }
    Ok(out)
}

pub fn load_microdata(path: &Path, schema: &Schema) -> Result<Vec<Record>> {
    let file = std::fs::File::open(path).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    parse_microdata(file, path, schema)
}

pub fn write_microdata<W: Write>(out: W, records: &[Record], schema: &Schema) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(microdata_header(schema))?;
    for r in records {
        let mut row = vec![r.id.clone()];
        row.extend(r.qi.iter().zip(&schema.qi).map(|(v, a)| a.format_value(*v)));
        row.push(schema.sensitive.name_of(r.sensitive).to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `value,successor,probability` rows. A blank probability shares the
/// mass left over by the explicit ones of the same value.
pub fn parse_update_model<R: Read>(input: R, path: &Path, schema: &Schema) -> Result<UpdateModel> {
    let mut rdr = reader_from(input);
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    expect_header(path, &header, &["value", "successor", "probability"])?;
    let s = &schema.sensitive;
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = line_of(&row);
        let value = s
            .index(&row[0])
            .ok_or_else(|| Error::parse(path, line, format!("unknown value {:?}", &row[0])))?;
        let succ = s
            .index(&row[1])
            .ok_or_else(|| Error::parse(path, line, format!("unknown successor {:?}", &row[1])))?;
        let p = match &row[2] {
            "" => None,
            raw => Some(parse_rational(raw).ok_or_else(|| Error::parse(path, line, format!("bad probability {raw:?}")))?),
        };
        rows.push((value, succ, p));
    }
    let model = UpdateModel::from_rows(s.len(), &rows)?;
    let violations = validate_update_model(&model);
    if !violations.is_empty() {
        let msgs: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::Validation(format!("invalid update model: {}", msgs.join("; "))));
    }
    Ok(model)
}

/// Writes every transition with its exact probability.
pub fn write_update_model<W: Write>(out: W, model: &UpdateModel, schema: &Schema) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["value", "successor", "probability"])?;
    for v in 0..model.domain() as u32 {
        for (s, p) in model.successors(v) {
            w.write_record([schema.sensitive.name_of(v), schema.sensitive.name_of(*s), &format_rational(p)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_update_model(path: &Path, schema: &Schema) -> Result<UpdateModel> {
    let file = std::fs::File::open(path).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    parse_update_model(file, path, schema)
}

fn release_header(schema: &Schema) -> Vec<&str> {
    let mut h = vec!["gid", "id"];
    h.extend(schema.qi.iter().map(|a| a.name.as_str()));
    h.extend(["sensitive", "is_counterfeit"]);
    h
}

/// One row per member: `gid,id,<qi extents...>,sensitive,is_counterfeit`.
pub fn write_release<W: Write>(out: W, release: &PublishedRelease, schema: &Schema) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(release_header(schema))?;
    for g in &release.groups {
        let extents: Vec<String> = g
            .region
            .extents
            .iter()
            .zip(&schema.qi)
            .map(|(e, a)| a.format_extent(*e))
            .collect();
        for m in &g.members {
            let mut row = vec![g.gid.to_string(), m.member.label()];
            row.extend(extents.iter().cloned());
            row.push(schema.sensitive.name_of(m.sensitive).to_string());
            row.push(if m.is_counterfeit() { "1" } else { "0" }.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_counterfeits<W: Write>(out: W, release: &PublishedRelease) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gid", "count"])?;
    for (gid, c) in &release.counterfeit_stats {
        w.write_record([gid.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a release file. `stats` is the counterfeit statistics file when
/// one accompanies the release; it must agree with the member rows.
pub fn read_release<R: Read, S: Read>(
    input: R,
    path: &Path,
    schema: &Schema,
    release_index: u32,
    stats: Option<(S, &Path)>,
) -> Result<PublishedRelease> {
    let mut rdr = reader_from(input);
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    expect_header(path, &header, &release_header(schema))?;
    let d = schema.qi.len();
    let mut groups: Vec<QiGroup> = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = line_of(&row);
        let gid: u32 = row[0]
            .parse()
            .map_err(|_| Error::parse(path, line, format!("bad gid {:?}", &row[0])))?;
        let mut extents = Vec::with_capacity(d);
        for (j, a) in schema.qi.iter().enumerate() {
            let raw = &row[j + 2];
            extents.push(
                a.parse_extent(raw)
                    .ok_or_else(|| Error::parse(path, line, format!("bad {} extent {raw:?}", a.name)))?,
            );
        }
        let region = Region { extents };
        let sensitive = schema
            .sensitive
            .index(&row[d + 2])
            .ok_or_else(|| Error::parse(path, line, format!("unknown sensitive value {:?}", &row[d + 2])))?;
        let label = &row[1];
        let member = match &row[d + 3] {
            "0" => Member::Real(label.to_string()),
            "1" => {
                let tag = label
                    .strip_prefix('c')
                    .and_then(|t| t.parse::<u32>().ok())
                    .ok_or_else(|| Error::parse(path, line, format!("bad counterfeit id {label:?}")))?;
                Member::Counterfeit(tag)
            }
            other => return Err(Error::parse(path, line, format!("bad is_counterfeit flag {other:?}"))),
        };
        if label.is_empty() || !ids.insert(member.clone()) {
            return Err(Error::parse(path, line, format!("duplicate or empty member {label:?}")));
        }
        let gm = GroupMember { member, sensitive };
        match groups.last_mut() {
            Some(g) if g.gid == gid => {
                if g.region != region {
                    return Err(Error::parse(path, line, format!("group {gid} rows disagree on the region")));
                }
                g.members.push(gm);
            }
            Some(g) if g.gid > gid => {
                return Err(Error::parse(path, line, "rows must be sorted by gid"));
            }
            _ => {
                if groups.iter().any(|g| g.gid == gid) {
                    return Err(Error::parse(path, line, format!("group {gid} is not contiguous")));
                }
                groups.push(QiGroup {
                    gid,
                    region,
                    members: vec![gm],
                })
            }
        }
    }
    let derived = PublishedRelease::derived_stats(&groups);
    let counterfeit_stats = match stats {
        None => derived,
        Some((input, spath)) => {
            let mut rdr = reader_from(input);
            let header = rdr.headers().map_err(|e| csv_err(spath, e))?.clone();
            expect_header(spath, &header, &["gid", "count"])?;
            let mut m = BTreeMap::new();
            for row in rdr.records() {
                let row = row.map_err(|e| csv_err(spath, e))?;
                let line = line_of(&row);
                let parse = |s: &str| s.parse::<u32>().map_err(|_| Error::parse(spath, line, format!("bad number {s:?}")));
                let (gid, c) = (parse(&row[0])?, parse(&row[1])?);
                if c > 0 && m.insert(gid, c).is_some() {
                    return Err(Error::parse(spath, line, format!("gid {gid} listed twice")));
                }
            }
            if m != derived {
                return Err(Error::Integrity(format!(
                    "counterfeit statistics of release {release_index} disagree with its member rows"
                )));
            }
            m
        }
    };
    Ok(PublishedRelease {
        release_index,
        groups,
        counterfeit_stats,
    })
}

pub fn load_release(path: &Path, stats: Option<&Path>, schema: &Schema, release_index: u32) -> Result<PublishedRelease> {
    let file = std::fs::File::open(path).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    match stats {
        Some(sp) => {
            let sfile = std::fs::File::open(sp).map_err(|e| Error::parse(sp, 0, e.to_string()))?;
            read_release(file, path, schema, release_index, Some((sfile, sp)))
        }
        None => read_release::<_, std::fs::File>(file, path, schema, release_index, None),
    }
}

pub fn write_et<W: Write>(out: W, et: &ExternalKnowledgeTable, schema: &Schema) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id"];
    header.extend(schema.qi.iter().map(|a| a.name.as_str()));
    w.write_record(&header)?;
    for (id, qi) in &et.rows {
        let mut row = vec![id.clone()];
        row.extend(qi.iter().zip(&schema.qi).map(|(v, a)| a.format_value(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_et(path: &Path, schema: &Schema, release_index: u32) -> Result<ExternalKnowledgeTable> {
    let mut rdr = open_csv(path)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let mut want = vec!["id"];
    want.extend(schema.qi.iter().map(|a| a.name.as_str()));
    expect_header(path, &header, &want)?;
    let mut rows = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = line_of(&row);
        let mut qi = Vec::with_capacity(schema.qi.len());
        for (j, a) in schema.qi.iter().enumerate() {
            qi.push(
                a.parse_value(&row[j + 1])
                    .ok_or_else(|| Error::parse(path, line, format!("bad {} value {:?}", a.name, &row[j + 1])))?,
            );
        }
        if rows.insert(row[0].to_string(), qi).is_some() {
            return Err(Error::parse(path, line, format!("duplicate id {:?}", &row[0])));
        }
    }
    Ok(ExternalKnowledgeTable { release_index, rows })
}

/// `id,version,risk_num,risk_den,risk_decimal`, one row per record version.
pub fn write_risks<W: Write>(out: W, risks: &[RecordRisk]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "version", "risk_num", "risk_den", "risk_decimal"])?;
    for r in risks {
        for (v, x) in r.report.versions.iter().zip(&r.report.risks) {
            w.write_record([
                r.report.id.clone(),
                v.to_string(),
                x.numer().to_string(),
                x.denom().to_string(),
                format_decimal(x, 6),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
