use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{csv_err, expect_header, line_of, reader_from};
use crate::sug::{Sug, SugEdge, SugNode};
use crate::updates::parse_rational;

/// Reads a hand-built attack graph: `node,<layer>,<name>,,<weight>` rows and
/// `edge,<layer>,<from>,<to>,<weight>` rows, where an edge's layer is the
/// layer of its source. Node names become values `0..` in first-seen order;
/// the name table is returned alongside.
pub fn load_sug_graph<R: Read>(input: R, path: &Path) -> Result<(Sug, Vec<String>)> {
    let mut rdr = reader_from(input);
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    expect_header(path, &header, &["kind", "layer", "from", "to", "weight"])?;
    let mut names: Vec<String> = Vec::new();
    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut layers: Vec<Vec<SugNode>> = Vec::new();
    let mut edges_raw: Vec<(usize, String, String, u64)> = Vec::new();
    let mut edge_w = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = line_of(&row);
        let layer: usize = row[1]
            .parse()
            .ok()
            .filter(|l| (1..=64).contains(l))
            .ok_or_else(|| Error::parse(path, line, format!("bad layer {:?}", &row[1])))?;
        let weight = parse_rational(&row[4]).ok_or_else(|| Error::parse(path, line, format!("bad weight {:?}", &row[4])))?;
        match &row[0] {
            "node" => {
                let name = row[2].to_string();
                let next = ids.len() as u32;
                let value = *ids.entry(name.clone()).or_insert_with(|| {
                    names.push(name);
                    next
                });
                if layers.len() < layer {
                    layers.resize(layer, Vec::new());
                }
                if layers[layer - 1].iter().any(|n| n.value == value) {
                    return Err(Error::parse(path, line, format!("node {:?} repeated in layer {layer}", &row[2])));
                }
                layers[layer - 1].push(SugNode { value, weight });
            }
            "edge" => {
                edges_raw.push((layer, row[2].to_string(), row[3].to_string(), line));
                edge_w.push(weight);
            }
            other => return Err(Error::parse(path, line, format!("unknown row kind {other:?}"))),
        }
    }
    let mut edges = vec![Vec::new(); layers.len().saturating_sub(1)];
    for ((layer, from, to, line), weight) in edges_raw.into_iter().zip(edge_w) {
        if layer >= layers.len() {
            return Err(Error::parse(path, line, "edge leaves the last layer"));
        }
        let find = |l: usize, name: &str| {
            let v = ids.get(name)?;
            layers[l].iter().position(|n| n.value == *v)
        };
        let f = find(layer - 1, &from).ok_or_else(|| Error::parse(path, line, format!("no node {from:?} in layer {layer}")))?;
        let t = find(layer, &to).ok_or_else(|| Error::parse(path, line, format!("no node {to:?} in layer {}", layer + 1)))?;
        edges[layer - 1].push(SugEdge { from: f, to: t, weight });
    }
    Ok((Sug::from_parts(layers, edges)?, names))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_layer_graph() {
        let text = "kind,layer,from,to,weight
node,1,A,,1/2
node,1,B,,1/2
node,2,A,,1
edge,1,A,A,1
edge,1,B,A,1/2
";
        let (g, names) = load_sug_graph(text.as_bytes(), Path::new("g.csv")).unwrap();
        assert_eq!(names, vec!["A", "B"]);
        assert_eq!(g.layer_count(), 2);
        assert_eq!(g.edge_count(), 2);
        assert!(load_sug_graph("kind,layer,from,to,weight\nedge,1,A,B,1\n".as_bytes(), Path::new("g")).is_err());
    }
}
