//! Plain-text hash file.
//!
//! ```text
//! k=2 m=1 num_anchors=2 num_relations=2 max_distance=3
//! 0<TAB>0,1<TAB>0,3<TAB>2
//! ```
//!
//! Padded slots are written as their numeric token or bucket id.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use super::{NodeHash, NodeHashes};
use crate::error::{Error, Result};

impl NodeHashes {
    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(
            w,
            "k={} m={} num_anchors={} num_relations={} max_distance={}",
            self.k, self.m, self.num_anchors, self.num_relations, self.max_distance
        )?;
        for (node, h) in self.hashes.iter().enumerate() {
            writeln!(
                w,
                "{node}\t{}\t{}\t{}",
                join(&h.anchors),
                join(&h.distances),
                join(&h.relations)
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty hash file".into()))??;
        let fields: HashMap<&str, usize> = header
            .split_whitespace()
            .map(|kv| {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Format(format!("bad header field {kv:?}")))?;
                let v = v
                    .parse()
                    .map_err(|_| Error::Format(format!("bad header value {kv:?}")))?;
                Ok((k, v))
            })
            .collect::<Result<_>>()?;
        let get = |key: &str| {
            fields
                .get(key)
                .copied()
                .ok_or_else(|| Error::Format(format!("header is missing {key}")))
        };
        let (k, m) = (get("k")?, get("m")?);
        let num_anchors = get("num_anchors")?;
        let num_relations = get("num_relations")?;
        let max_distance = fields.get("max_distance").copied();

        let mut hashes = Vec::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 2;
            let err = |message: String| Error::Parse {
                line: lineno,
                message,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(err(format!("expected 4 columns, found {}", cols.len())));
            }
            let node: usize = cols[0].parse().map_err(|_| err(format!("bad node id {:?}", cols[0])))?;
            if node != hashes.len() {
                return Err(err(format!("expected node {}, found {node}", hashes.len())));
            }
            let anchors = split(cols[1]).map_err(&err)?;
            let distances = split(cols[2]).map_err(&err)?;
            let relations = split(cols[3]).map_err(&err)?;
            if anchors.len() != k || distances.len() != k || relations.len() != m {
                return Err(err("slot count does not match header".into()));
            }
            hashes.push(NodeHash {
                anchors,
                distances,
                relations,
            });
        }

        let max_distance = match max_distance {
            Some(d) => d as u32,
            // Without the field, the unreachable bucket is the largest bucket
            // in use by a padded or disconnected slot.
            None => infer_max_distance(&hashes, num_anchors),
        };
        let out = NodeHashes {
            k,
            m,
            num_anchors,
            num_relations,
            max_distance,
            hashes,
        };
        out.validate()?;
        Ok(out)
    }

    /// Checks that every token and bucket fits the declared layout.
    pub fn validate(&self) -> Result<()> {
        let vocab = self.vocab();
        let size = vocab.size() as u32;
        let buckets = self.num_distance_buckets() as u32;
        for (node, h) in self.hashes.iter().enumerate() {
            let bad = h.anchors.iter().chain(&h.relations).any(|&t| t >= size)
                || h.distances.iter().any(|&d| d >= buckets)
                || h.anchors.iter().any(|&t| {
                    (t as usize) >= self.num_anchors && t != vocab.pad() && t != vocab.disconnected()
                })
                || h.relations.iter().any(|&t| (t as usize) < self.num_anchors || t == vocab.disconnected());
            if bad {
                return Err(Error::Format(format!("hash of node {node} does not fit the vocabulary")));
            }
        }
        Ok(())
    }
}

fn infer_max_distance(hashes: &[NodeHash], num_anchors: usize) -> u32 {
    let mut finite = 0;
    let mut padded = None;
    for h in hashes {
        for (&a, &d) in h.anchors.iter().zip(&h.distances) {
            if (a as usize) < num_anchors {
                finite = finite.max(d);
            } else {
                padded = Some(padded.unwrap_or(0).max(d));
            }
        }
    }
    match padded {
        Some(p) if p > 0 => p - 1,
        _ => finite,
    }
}

fn join(v: &[u32]) -> String {
    let mut s = String::with_capacity(v.len() * 4);
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&x.to_string());
    }
    s
}

fn split(s: &str) -> std::result::Result<Vec<u32>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| x.parse().map_err(|_| format!("bad token {x:?}")))
        .collect()
}
