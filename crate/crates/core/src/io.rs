//! On-disk formats shared by the pipeline stages.
//!
//! Feature file (little-endian):
//!
//! ```text
//! "GBGSFEAT"  u32 version  u64 N  u64 M
//! N·M f64, row-major
//! N × (u32 byte length, UTF-8 node id)
//! u32 byte length, JSON feature layout (length 0 when absent)
//! ```
//!
//! Graph file: a `# nodes=N` line, then one `i j w` line per undirected
//! edge with `i < j`. Weights are written in the shortest decimal form that
//! parses back to the same `f64`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureLayout;
use crate::graph::{FeatureMatrix, Graph};
use crate::sampling::SamplingSet;
use crate::sobolev::{LabelMatrix, RecoveredSignal};
use crate::spectral::SpectralBasis;

pub const FEATURE_MAGIC: &[u8; 8] = b"GBGSFEAT";
pub const FEATURE_VERSION: u32 = 1;

/// A feature matrix with the layout that produced it, if known.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub matrix: FeatureMatrix,
    pub layout: Option<FeatureLayout>,
}

pub fn encode_features(x: &FeatureMatrix, layout: Option<&FeatureLayout>) -> Result<Vec<u8>> {
    if let Some(l) = layout {
        if l.total_dim() != x.cols() {
            return Err(Error::Structural(format!(
                "layout describes {} columns, matrix has {}",
                l.total_dim(),
                x.cols()
            )));
        }
    }
    let mut out = Vec::with_capacity(28 + 8 * x.data().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(x.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(x.cols() as u64).to_le_bytes());
    for v in x.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for id in x.node_ids() {
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    let descriptor = layout.map(|l| serde_json::to_vec(l).expect("layout serializes")).unwrap_or_default();
    out.extend_from_slice(&(descriptor.len() as u32).to_le_bytes());
    out.extend_from_slice(&descriptor);
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::format("feature file", "truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureFile> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(8)? != FEATURE_MAGIC {
        return Err(Error::format("feature file", "bad magic"));
    }
    let version = cur.u32()?;
    if version != FEATURE_VERSION {
        return Err(Error::format("feature file", format!("unsupported version {version}")));
    }
    let n = usize::try_from(cur.u64()?).map_err(|_| Error::format("feature file", "row count overflow"))?;
    let m = usize::try_from(cur.u64()?).map_err(|_| Error::format("feature file", "column count overflow"))?;
    let count = n.checked_mul(m).filter(|c| c.checked_mul(8).is_some_and(|b| b <= bytes.len()));
    let count = count.ok_or_else(|| Error::format("feature file", "header sizes exceed file length"))?;
    let data: Vec<f64> =
        cur.take(8 * count)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let len = cur.u32()? as usize;
        let s = std::str::from_utf8(cur.take(len)?).map_err(|_| Error::format("feature file", "node id is not UTF-8"))?;
        ids.push(s.to_owned());
    }
    let layout = match cur.u32()? as usize {
        0 => None,
        len => Some(
            serde_json::from_slice::<FeatureLayout>(cur.take(len)?)
                .map_err(|e| Error::format("feature file", format!("layout descriptor: {e}")))?,
        ),
    };
    if cur.pos != bytes.len() {
        return Err(Error::format("feature file", "trailing bytes"));
    }
    if let Some(l) = &layout {
        if l.total_dim() != m {
            return Err(Error::format("feature file", format!("layout has {} dims, header says {m}", l.total_dim())));
        }
    }
    Ok(FeatureFile { matrix: FeatureMatrix::new(n, m, data, ids)?, layout })
}

pub fn write_features(path: &Path, x: &FeatureMatrix, layout: Option<&FeatureLayout>) -> Result<()> {
    std::fs::write(path, encode_features(x, layout)?).map_err(|e| Error::io(path, e))
}

/// Reads a binary feature file, or a CSV when the magic is absent.
pub fn read_features(path: &Path) -> Result<FeatureFile> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(FEATURE_MAGIC) {
        decode_features(&bytes)
    } else {
        Ok(FeatureFile { matrix: parse_feature_csv(&bytes)?, layout: None })
    }
}

/// CSV with one row per node: `node_id, x_1, …, x_M`. A header row is
/// detected by a non-numeric second field.
pub fn parse_feature_csv(bytes: &[u8]) -> Result<FeatureMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(bytes);
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut cols = None;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format("feature CSV", e.to_string()))?;
        if rec.len() < 2 {
            return Err(Error::format("feature CSV", format!("line {}: need node_id and at least one value", line + 1)));
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().skip(1).map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::format("feature CSV", format!("line {}: {e}", line + 1))),
        };
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(Error::format("feature CSV", format!("line {}: {} values, expected {c}", line + 1, values.len())))
            }
            _ => {}
        }
        ids.push(rec[0].to_owned());
        data.extend(values);
    }
    FeatureMatrix::new(ids.len(), cols.unwrap_or(0), data, ids)
}

pub fn write_graph(path: &Path, g: &Graph) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let res = (|| -> std::io::Result<()> {
        writeln!(w, "# nodes={}", g.n_nodes())?;
        for &(i, j, wt) in g.edges() {
            writeln!(w, "{i} {j} {wt}")?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_graph(path: &Path) -> Result<Graph> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut n = None;
    let mut edges = Vec::new();
    for (k, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("nodes=") {
                n = Some(v.trim().parse::<usize>().map_err(|e| Error::format("graph file", format!("header: {e}")))?);
            }
            continue;
        }
        let bad = || Error::format("graph file", format!("line {}: expected `i j w`", k + 1));
        let mut it = line.split_whitespace();
        let i: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let j: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let wt: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if it.next().is_some() {
            return Err(bad());
        }
        edges.push((i, j, wt));
    }
    let n = n.ok_or_else(|| Error::format("graph file", "missing `# nodes=N` header"))?;
    Graph::new(n, edges)
}

/// Metadata stored with a sampling set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SamplingMeta {
    pub seed: Option<u64>,
    pub density: Option<f64>,
}

pub fn write_sampling(path: &Path, s: &SamplingSet, meta: &SamplingMeta) -> Result<()> {
    let mut text = String::from("#");
    if let Some(seed) = meta.seed {
        text += &format!(" seed={seed},");
    }
    if let Some(d) = meta.density {
        text += &format!(" density={d},");
    }
    text += &format!(" n_nodes={}\nindex\n", s.n_nodes());
    for i in s.sorted().indices() {
        text += &format!("{i}\n");
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_sampling(path: &Path) -> Result<(SamplingSet, SamplingMeta)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut meta = SamplingMeta::default();
    let mut n_nodes = None;
    let mut idx = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(rest) = line.strip_prefix('#') {
            for kv in rest.split(',') {
                let Some((k, v)) = kv.trim().split_once('=') else { continue };
                let bad = || Error::format("sampling file", format!("bad {k} value {v:?}"));
                match k.trim() {
                    "seed" => meta.seed = Some(v.trim().parse().map_err(|_| bad())?),
                    "density" => meta.density = Some(v.trim().parse().map_err(|_| bad())?),
                    "n_nodes" => n_nodes = Some(v.trim().parse().map_err(|_| bad())?),
                    _ => {}
                }
            }
        } else if line != "index" {
            idx.push(line.parse::<usize>().map_err(|_| Error::format("sampling file", format!("bad index {line:?}")))?);
        }
    }
    let n = n_nodes.ok_or_else(|| Error::format("sampling file", "missing n_nodes in header"))?;
    Ok((SamplingSet::new(idx, n)?, meta))
}

/// Resolves `node_id` fields: exact id match when ids are given, else
/// a 0-based index.
fn resolve_node(field: &str, n_nodes: usize, ids: Option<&HashMap<&str, usize>>) -> Result<usize> {
    let found = match ids {
        Some(map) => map.get(field).copied().or_else(|| field.parse().ok().filter(|_| map.is_empty())),
        None => field.parse().ok(),
    };
    found
        .filter(|&i| i < n_nodes)
        .ok_or_else(|| Error::format("labels CSV", format!("unknown node {field:?}")))
}

fn parse_flag(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "y" => Some(true),
        "0" | "false" | "no" | "n" | "" => Some(false),
        _ => None,
    }
}

/// Reads `node_id,class,sampled` rows. Rows with a false `sampled` flag are
/// ignored; the class count is at least 2.
pub fn read_labels(path: &Path, n_nodes: usize, node_ids: Option<&[String]>) -> Result<LabelMatrix> {
    let text = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, n_nodes, node_ids)
}

pub fn parse_labels(bytes: &[u8], n_nodes: usize, node_ids: Option<&[String]>) -> Result<LabelMatrix> {
    let map: Option<HashMap<&str, usize>> =
        node_ids.map(|ids| ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect());
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(bytes);
    let headers = rdr.headers().map_err(|e| Error::format("labels CSV", e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (c_node, c_class) = match (col("node_id"), col("class")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::format("labels CSV", "header must name node_id and class")),
    };
    let c_sampled = col("sampled");
    let mut known = Vec::new();
    let mut n_classes = 2;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format("labels CSV", e.to_string()))?;
        let line = k + 2;
        let field = |c: usize| rec.get(c).ok_or_else(|| Error::format("labels CSV", format!("line {line}: short row")));
        if let Some(c) = c_sampled {
            let flag = field(c)?;
            let sampled =
                parse_flag(flag).ok_or_else(|| Error::format("labels CSV", format!("line {line}: bad flag {flag:?}")))?;
            if !sampled {
                continue;
            }
        }
        let node = resolve_node(field(c_node)?, n_nodes, map.as_ref())?;
        let class: usize = field(c_class)?
            .parse()
            .map_err(|_| Error::format("labels CSV", format!("line {line}: class must be a nonnegative integer")))?;
        n_classes = n_classes.max(class + 1);
        known.push((node, class));
    }
    if known.is_empty() {
        return Err(Error::format("labels CSV", "no sampled labels"));
    }
    LabelMatrix::from_classes(n_nodes, n_classes, &known)
}

pub fn write_labels(path: &Path, labels: &LabelMatrix, node_ids: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let res = (|| -> csv::Result<()> {
        w.write_record(["node_id", "class", "sampled"])?;
        for &s in labels.sampled().indices() {
            let class = (0..labels.n_classes()).find(|&q| labels.y()[(s, q)] == 1.0).unwrap_or(0);
            let id = node_ids.map_or_else(|| s.to_string(), |ids| ids[s].clone());
            w.write_record([id, class.to_string(), "1".into()])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| csv_error(path, e))
}

/// `node_id, z0 … z{Q-1}, class` for every node.
pub fn write_recovered(path: &Path, rec: &RecoveredSignal, node_ids: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let q = rec.z.ncols();
    let res = (|| -> csv::Result<()> {
        let mut header = vec!["node_id".to_string()];
        header.extend((0..q).map(|c| format!("z{c}")));
        header.push("class".into());
        w.write_record(&header)?;
        for i in 0..rec.z.nrows() {
            let mut row = vec![node_ids.map_or_else(|| i.to_string(), |ids| ids[i].clone())];
            row.extend((0..q).map(|c| rec.z[(i, c)].to_string()));
            row.push(rec.labels[i].to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| csv_error(path, e))
}

/// One real vector per node, written as `node_id,value`.
pub fn write_signal(path: &Path, values: &[f64], node_ids: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let res = (|| -> csv::Result<()> {
        w.write_record(["node_id", "value"])?;
        for (i, v) in values.iter().enumerate() {
            w.write_record([node_ids.map_or_else(|| i.to_string(), |ids| ids[i].clone()), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| csv_error(path, e))
}

/// Reads a `node_id,value` signal, ordered by node.
pub fn read_signal(path: &Path, n_nodes: usize, node_ids: Option<&[String]>) -> Result<Vec<Option<f64>>> {
    let map: Option<HashMap<&str, usize>> =
        node_ids.map(|ids| ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect());
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = vec![None; n_nodes];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        if rec.len() < 2 {
            return Err(Error::format("signal CSV", "expected node_id,value rows"));
        }
        let node = resolve_node(&rec[0], n_nodes, map.as_ref())?;
        let v: f64 = rec[1].parse().map_err(|_| Error::format("signal CSV", format!("bad value {:?}", &rec[1])))?;
        out[node] = Some(v);
    }
    Ok(out)
}

/// Eigenvalues as `index,lambda`, optionally followed by the eigenvector
/// entries `u0 … u{N-1}` on each row.
pub fn write_spectrum(path: &Path, basis: &SpectralBasis, with_vectors: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let n = basis.n();
    let u: &DMatrix<f64> = basis.eigenvectors();
    let res = (|| -> csv::Result<()> {
        let mut header = vec!["index".to_string(), "lambda".to_string()];
        if with_vectors {
            header.extend((0..n).map(|i| format!("u{i}")));
        }
        w.write_record(&header)?;
        for k in 0..n {
            let mut row = vec![k.to_string(), basis.eigenvalues()[k].to_string()];
            if with_vectors {
                row.extend((0..n).map(|i| u[(i, k)].to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| csv_error(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::format("CSV", format!("{}: {e}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_matrix() -> FeatureMatrix {
        FeatureMatrix::new(3, 2, vec![0.1, -2.5, 1e-300, 3.0, f64::MAX, 0.0], vec!["a".into(), "bé".into(), "c/1/x".into()])
            .unwrap()
    }

    #[test]
    fn feature_round_trip() {
        let x = sample_matrix();
        let bytes = encode_features(&x, None).unwrap();
        assert_eq!(&bytes[..8], b"GBGSFEAT");
        assert_eq!(u64::from_le_bytes(bytes[12..20].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[20..28].try_into().unwrap()), 2);
        let back = decode_features(&bytes).unwrap();
        assert_eq!(back.matrix, x);
        assert_eq!(back.layout, None);
    }

    #[test]
    fn layout_descriptor_round_trip() {
        let layout = FeatureLayout { of_hist_bins: 2, intensity_bins: 1, ..Default::default() };
        let dim = layout.total_dim();
        let x = FeatureMatrix::new(2, dim, (0..2 * dim).map(|v| v as f64).collect(), vec!["p".into(), "q".into()])
            .unwrap();
        let back = decode_features(&encode_features(&x, Some(&layout)).unwrap()).unwrap();
        assert_eq!(back.layout, Some(layout));
        assert!(encode_features(&sample_matrix(), Some(&layout)).is_err());
    }

    #[test]
    fn corrupt_feature_files() {
        let bytes = encode_features(&sample_matrix(), None).unwrap();
        assert!(decode_features(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_features(&extra).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_features(&bad).is_err());
        let mut huge = bytes;
        huge[12..20].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode_features(&huge).is_err());
    }

    #[test]
    fn feature_csv_import() {
        let x = parse_feature_csv(b"node_id,f1,f2\nn0, 1.5, 2\nn1,3,4e-1\n").unwrap();
        assert_eq!(x.node_ids(), ["n0", "n1"]);
        assert_eq!(x.data(), [1.5, 2.0, 3.0, 0.4]);
        let y = parse_feature_csv(b"a,1\nb,2\n").unwrap();
        assert_eq!(y.rows(), 2);
        assert!(parse_feature_csv(b"a,1,2\nb,3\n").is_err());
        assert!(parse_feature_csv(b"a,1\nb,x\n").is_err());
    }

    #[test]
    fn read_features_dispatches_on_magic() {
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("x.feat");
        write_features(&bin, &sample_matrix(), None).unwrap();
        assert_eq!(read_features(&bin).unwrap().matrix, sample_matrix());
        let csv = dir.path().join("x.csv");
        std::fs::write(&csv, "a,1\nb,2\n").unwrap();
        assert_eq!(read_features(&csv).unwrap().matrix.cols(), 1);
    }

    #[test]
    fn graph_round_trip_is_lossless() {
        let g = Graph::new(4, vec![(0, 1, 0.1 + 0.2), (1, 2, 1e-300), (2, 3, std::f64::consts::PI)]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        write_graph(&p, &g).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# nodes=4\n0 1 0.30000000000000004\n"));
        let back = read_graph(&p).unwrap();
        assert_eq!(back.edges(), g.edges());
        std::fs::write(&p, "0 1 1\n").unwrap();
        assert!(read_graph(&p).is_err());
        std::fs::write(&p, "# nodes=2\n0 1\n").unwrap();
        assert!(read_graph(&p).is_err());
    }

    #[test]
    fn sampling_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = SamplingSet::new(vec![7, 2, 4], 10).unwrap();
        let meta = SamplingMeta { seed: Some(42), density: Some(0.3) };
        write_sampling(&p, &s, &meta).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "# seed=42, density=0.3, n_nodes=10\nindex\n2\n4\n7\n");
        let (back, m) = read_sampling(&p).unwrap();
        assert_eq!(back.indices(), [2, 4, 7]);
        assert_eq!(m, meta);
    }

    #[test]
    fn labels_by_index_and_by_id() {
        let l = parse_labels(b"node_id,class,sampled\n0,1,1\n2,0,true\n1,1,0\n", 3, None).unwrap();
        assert_eq!(l.sampled().indices(), [0, 2]);
        assert_eq!(l.y()[(0, 1)], 1.0);
        let ids: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let l = parse_labels(b"node_id,class\nz,2\n", 3, Some(&ids)).unwrap();
        assert_eq!(l.n_classes(), 3);
        assert_eq!(l.sampled().indices(), [2]);
        assert!(parse_labels(b"node_id,class\nw,0\n", 3, Some(&ids)).is_err());
        assert!(parse_labels(b"node_id,class\n5,0\n", 3, None).is_err());
        assert!(parse_labels(b"node_id,class,sampled\n0,1,0\n", 3, None).is_err());
    }

    #[test]
    fn labels_write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.csv");
        let l = LabelMatrix::from_classes(4, 2, &[(3, 1), (0, 0)]).unwrap();
        write_labels(&p, &l, None).unwrap();
        assert_eq!(read_labels(&p, 4, None).unwrap(), l);
    }
}
