//! Bipartite ownership snapshots: sparse weighted/binary matrices over
//! holder and asset layers, degree sequences, pairwise overlaps and
//! buy/sell delta construction.
//!
//! Ids are opaque strings mapped to dense indices at construction; every
//! computation downstream runs on indices. Snapshots are immutable once
//! built and safe to share across threads.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Which layer a monopartite projection lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Holders,
    Assets,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layer::Holders => write!(f, "holders"),
            Layer::Assets => write!(f, "assets"),
        }
    }
}

impl std::str::FromStr for Layer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "holders" => Ok(Layer::Holders),
            "assets" => Ok(Layer::Assets),
            other => Err(Error::InvalidConfig(format!("unknown layer {other:?}"))),
        }
    }
}

/// One dated bipartite ownership snapshot.
///
/// `W` is stored sparse in both row-major (holder) and column-major (asset)
/// order; the binary skeleton `A` is implicit: an entry exists iff its
/// weight is positive. Holders and assets with no entries do not exist in
/// a snapshot, so every degree is at least 1.
#[derive(Debug, Clone)]
pub struct Snapshot {
    date: String,
    holders: Vec<String>,
    assets: Vec<String>,
    holder_index: HashMap<String, usize>,
    asset_index: HashMap<String, usize>,
    // CSR: per holder, owned assets and share counts.
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    row_weight: Vec<f64>,
    // CSC: per asset, owning holders and share counts.
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    col_weight: Vec<f64>,
    binary_only: bool,
}

impl Snapshot {
    /// Build a snapshot from raw (holder_id, asset_id, shares) records.
    ///
    /// Zero-share records are dropped, exact duplicates are merged, and
    /// duplicates with conflicting shares are an error. Ids are ordered
    /// lexicographically.
    pub fn from_entries(
        date: impl Into<String>,
        entries: impl IntoIterator<Item = (String, String, f64)>,
        binary_only: bool,
    ) -> Result<Snapshot> {
        let mut rows: Vec<(String, String, f64)> =
            entries.into_iter().filter(|(_, _, w)| *w != 0.0).collect();
        rows.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
        rows.dedup_by(|next, prev| next.0 == prev.0 && next.1 == prev.1 && next.2 == prev.2);
        for pair in rows.windows(2) {
            if pair[0].0 == pair[1].0 && pair[0].1 == pair[1].1 {
                return Err(Error::ConflictingDuplicate {
                    holder: pair[0].0.clone(),
                    asset: pair[0].1.clone(),
                    first: pair[0].2,
                    second: pair[1].2,
                });
            }
        }

        let mut holders: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
        holders.dedup();
        let mut assets: Vec<String> = rows.iter().map(|r| r.1.clone()).collect();
        assets.sort();
        assets.dedup();
        let holder_index: HashMap<String, usize> = holders
            .iter()
            .enumerate()
            .map(|(i, h)| (h.clone(), i))
            .collect();
        let asset_index: HashMap<String, usize> = assets
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();

        // CSR straight from the (holder, asset)-sorted rows.
        let mut row_ptr = Vec::with_capacity(holders.len() + 1);
        let mut col_idx = Vec::with_capacity(rows.len());
        let mut row_weight = Vec::with_capacity(rows.len());
        row_ptr.push(0);
        let mut current = 0usize;
        for (h, a, w) in &rows {
            let hi = holder_index[h];
            while current < hi {
                row_ptr.push(col_idx.len());
                current += 1;
            }
            col_idx.push(asset_index[a]);
            row_weight.push(if binary_only { 1.0 } else { *w });
        }
        while row_ptr.len() <= holders.len() {
            row_ptr.push(col_idx.len());
        }

        // CSC by re-sorting on (asset, holder).
        let mut by_asset: Vec<(usize, usize, f64)> = rows
            .iter()
            .map(|(h, a, w)| {
                (
                    asset_index[a],
                    holder_index[h],
                    if binary_only { 1.0 } else { *w },
                )
            })
            .collect();
        by_asset.sort_unstable_by_key(|&(a, h, _)| (a, h));
        let mut col_ptr = Vec::with_capacity(assets.len() + 1);
        let mut row_idx = Vec::with_capacity(rows.len());
        let mut col_weight = Vec::with_capacity(rows.len());
        col_ptr.push(0);
        let mut current = 0usize;
        for (ai, hi, w) in &by_asset {
            while current < *ai {
                col_ptr.push(row_idx.len());
                current += 1;
            }
            row_idx.push(*hi);
            col_weight.push(*w);
        }
        while col_ptr.len() <= assets.len() {
            col_ptr.push(row_idx.len());
        }

        Ok(Snapshot {
            date: date.into(),
            holders,
            assets,
            holder_index,
            asset_index,
            row_ptr,
            col_idx,
            row_weight,
            col_ptr,
            row_idx,
            col_weight,
            binary_only,
        })
    }

    pub fn date(&self) -> &str {
        &self.date
    }

    pub fn holder_ids(&self) -> &[String] {
        &self.holders
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.assets
    }

    pub fn num_holders(&self) -> usize {
        self.holders.len()
    }

    pub fn num_assets(&self) -> usize {
        self.assets.len()
    }

    /// Total number of ownership relations L.
    pub fn num_links(&self) -> usize {
        self.col_idx.len()
    }

    pub fn is_binary_only(&self) -> bool {
        self.binary_only
    }

    pub fn holder_index_of(&self, id: &str) -> Option<usize> {
        self.holder_index.get(id).copied()
    }

    pub fn asset_index_of(&self, id: &str) -> Option<usize> {
        self.asset_index.get(id).copied()
    }

    pub fn holder_degree(&self, holder: usize) -> usize {
        self.row_ptr[holder + 1] - self.row_ptr[holder]
    }

    pub fn asset_degree(&self, asset: usize) -> usize {
        self.col_ptr[asset + 1] - self.col_ptr[asset]
    }

    /// Asset indices held by a holder, ascending.
    pub fn assets_of(&self, holder: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[holder]..self.row_ptr[holder + 1]]
    }

    /// Share counts aligned with `assets_of`.
    pub fn weights_of(&self, holder: usize) -> &[f64] {
        &self.row_weight[self.row_ptr[holder]..self.row_ptr[holder + 1]]
    }

    /// Holder indices owning an asset, ascending.
    pub fn holders_of(&self, asset: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[asset]..self.col_ptr[asset + 1]]
    }

    /// Share counts aligned with `holders_of`.
    pub fn holder_weights_of(&self, asset: usize) -> &[f64] {
        &self.col_weight[self.col_ptr[asset]..self.col_ptr[asset + 1]]
    }

    pub fn weight(&self, holder: usize, asset: usize) -> f64 {
        let cols = self.assets_of(holder);
        match cols.binary_search(&asset) {
            Ok(pos) => self.weights_of(holder)[pos],
            Err(_) => 0.0,
        }
    }

    /// Iterate (holder index, asset index, weight) in canonical order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.num_holders()).flat_map(move |h| {
            self.assets_of(h)
                .iter()
                .zip(self.weights_of(h))
                .map(move |(&a, &w)| (h, a, w))
        })
    }

    /// Snapshot with holder and asset layers swapped.
    ///
    /// Asset-layer projections reuse the holder-layer machinery through this.
    pub fn transposed(&self) -> Snapshot {
        Snapshot {
            date: self.date.clone(),
            holders: self.assets.clone(),
            assets: self.holders.clone(),
            holder_index: self.asset_index.clone(),
            asset_index: self.holder_index.clone(),
            row_ptr: self.col_ptr.clone(),
            col_idx: self.row_idx.clone(),
            row_weight: self.col_weight.clone(),
            col_ptr: self.row_ptr.clone(),
            row_idx: self.col_idx.clone(),
            col_weight: self.row_weight.clone(),
            binary_only: self.binary_only,
        }
    }

    /// Degrees on both layers plus degree classes over the layer being
    /// summed over in the projection (the classes the null distribution
    /// depends on).
    pub fn degree_sequence(&self, projected: Layer) -> DegreeSequence {
        let holder_degrees: Vec<usize> = (0..self.num_holders())
            .map(|h| self.holder_degree(h))
            .collect();
        let asset_degrees: Vec<usize> = (0..self.num_assets())
            .map(|a| self.asset_degree(a))
            .collect();
        let classes = match projected {
            Layer::Holders => DegreeClasses::from_degrees(Layer::Assets, &asset_degrees),
            Layer::Assets => DegreeClasses::from_degrees(Layer::Holders, &holder_degrees),
        };
        DegreeSequence {
            projected,
            holder_degrees,
            asset_degrees,
            classes,
        }
    }

    /// All pairs on the projected layer with a positive overlap, canonically
    /// ordered (a < b) and sorted. Runs over the opposite layer's adjacency
    /// lists, so the cost is the sum of squared opposite degrees rather than
    /// a dense two-layer scan.
    pub fn overlaps(&self, projected: Layer) -> Vec<OverlapRecord> {
        let opposite_count = match projected {
            Layer::Holders => self.num_assets(),
            Layer::Assets => self.num_holders(),
        };
        let mut acc: HashMap<(usize, usize), usize> = HashMap::new();
        for node in 0..opposite_count {
            let members = match projected {
                Layer::Holders => self.holders_of(node),
                Layer::Assets => self.assets_of(node),
            };
            for i in 0..members.len() {
                for j in (i + 1)..members.len() {
                    *acc.entry((members[i], members[j])).or_insert(0) += 1;
                }
            }
        }
        let mut records: Vec<OverlapRecord> = acc
            .into_iter()
            .map(|((a, b), overlap)| OverlapRecord { a, b, overlap })
            .collect();
        records.sort_unstable_by_key(|r| (r.a, r.b));
        records
    }

    /// Sub-snapshot of holders matching a predicate and the assets they touch.
    pub fn restrict(&self, keep: impl Fn(&str) -> bool) -> Snapshot {
        let entries = self.entries().filter_map(|(h, a, w)| {
            let id = &self.holders[h];
            keep(id).then(|| (id.clone(), self.assets[a].clone(), w))
        });
        Snapshot::from_entries(
            self.date.clone(),
            entries.collect::<Vec<_>>(),
            self.binary_only,
        )
        .expect("restriction of a valid snapshot cannot conflict")
    }

    /// Canonical dump: `holder_id,asset_id,shares` sorted by (holder, asset).
    pub fn write_canonical(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "holder_id,asset_id,shares")?;
        for (h, a, weight) in self.entries() {
            writeln!(w, "{},{},{}", self.holders[h], self.assets[a], weight)?;
        }
        Ok(())
    }

    pub fn write_canonical_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_canonical(&mut buf)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Degree sequences of a snapshot plus the degree-class decomposition of
/// the non-projected layer.
#[derive(Debug, Clone)]
pub struct DegreeSequence {
    pub projected: Layer,
    pub holder_degrees: Vec<usize>,
    pub asset_degrees: Vec<usize>,
    pub classes: DegreeClasses,
}

impl DegreeSequence {
    /// Degrees of the projected layer (the layer whose pairs get validated).
    pub fn projected_degrees(&self) -> &[usize] {
        match self.projected {
            Layer::Holders => &self.holder_degrees,
            Layer::Assets => &self.asset_degrees,
        }
    }

    pub fn num_links(&self) -> usize {
        self.holder_degrees.iter().sum()
    }
}

/// Nodes of one layer grouped by identical degree.
#[derive(Debug, Clone)]
pub struct DegreeClasses {
    pub layer: Layer,
    /// Distinct degrees, ascending.
    pub degrees: Vec<usize>,
    /// Multiplicity of each distinct degree.
    pub counts: Vec<usize>,
    /// Class index per node of the layer.
    pub node_class: Vec<usize>,
}

impl DegreeClasses {
    pub fn from_degrees(layer: Layer, degrees: &[usize]) -> DegreeClasses {
        let mut distinct: Vec<usize> = degrees.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let index: HashMap<usize, usize> =
            distinct.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        let mut counts = vec![0usize; distinct.len()];
        let node_class: Vec<usize> = degrees
            .iter()
            .map(|d| {
                let c = index[d];
                counts[c] += 1;
                c
            })
            .collect();
        DegreeClasses {
            layer,
            degrees: distinct,
            counts,
            node_class,
        }
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }
}

/// Positive pairwise overlap between two nodes of the projected layer,
/// stored once with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapRecord {
    pub a: usize,
    pub b: usize,
    pub overlap: usize,
}

/// Buy and sell networks between two consecutive snapshots: a buy edge is a
/// position whose share count increased, a sell edge one that decreased.
/// Both outputs are binary-only; the buy and sell entry sets are disjoint.
pub fn delta_networks(prev: &Snapshot, curr: &Snapshot) -> Result<(Snapshot, Snapshot)> {
    if prev.date == curr.date {
        return Err(Error::IdenticalDates(curr.date.clone()));
    }
    let mut prev_weights: HashMap<(&str, &str), f64> = HashMap::with_capacity(prev.num_links());
    for (h, a, w) in prev.entries() {
        prev_weights.insert((prev.holders[h].as_str(), prev.assets[a].as_str()), w);
    }
    let mut buy = Vec::new();
    let mut sell = Vec::new();
    for (h, a, w) in curr.entries() {
        let key = (curr.holders[h].as_str(), curr.assets[a].as_str());
        let before = prev_weights.remove(&key).unwrap_or(0.0);
        if w > before {
            buy.push((key.0.to_owned(), key.1.to_owned(), 1.0));
        } else if w < before {
            sell.push((key.0.to_owned(), key.1.to_owned(), 1.0));
        }
    }
    // Entries present before and absent now are sells.
    for ((h, a), _) in prev_weights {
        sell.push((h.to_owned(), a.to_owned(), 1.0));
    }
    Ok((
        Snapshot::from_entries(curr.date.clone(), buy, true)?,
        Snapshot::from_entries(curr.date.clone(), sell, true)?,
    ))
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

/// Load a snapshot from delimiter-separated text with header
/// `holder_id,asset_id,shares`. A two-column `holder_id,asset_id` header is
/// accepted as binary-only input: weights are set to 1 and weighted
/// analytics will refuse to run on the result.
pub fn load_snapshot(reader: impl Read, date: &str, source_name: &str) -> Result<Snapshot> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            path: source_name.into(),
            row: 1,
            msg: e.to_string(),
        })?
        .clone();
    let binary_only = match headers.len() {
        3 if &headers[0] == "holder_id" && &headers[1] == "asset_id" && &headers[2] == "shares" => {
            false
        }
        2 if &headers[0] == "holder_id" && &headers[1] == "asset_id" => true,
        _ => {
            return Err(Error::Parse {
                path: source_name.into(),
                row: 1,
                msg: format!(
                    "expected header holder_id,asset_id[,shares], got {:?}",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            })
        }
    };
    let mut entries = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            path: source_name.into(),
            row: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let shares = if binary_only {
            1.0
        } else {
            let raw = record.get(2).unwrap_or("");
            let parsed: f64 = raw.trim().parse().map_err(|_| Error::Parse {
                path: source_name.into(),
                row,
                msg: format!("unparseable shares {raw:?}"),
            })?;
            if !parsed.is_finite() {
                return Err(Error::Parse {
                    path: source_name.into(),
                    row,
                    msg: format!("non-finite shares {raw:?}"),
                });
            }
            if parsed < 0.0 {
                return Err(Error::Parse {
                    path: source_name.into(),
                    row,
                    msg: format!("negative shares at row {row}"),
                });
            }
            parsed
        };
        entries.push((record[0].to_owned(), record[1].to_owned(), shares));
    }
    Snapshot::from_entries(date, entries, binary_only)
}

pub fn load_snapshot_from_path(path: impl AsRef<Path>, date: &str) -> Result<Snapshot> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    load_snapshot(file, date, &path.display().to_string())
}

// ---------------------------------------------------------------------------
// Metadata tables
// ---------------------------------------------------------------------------

/// Per-asset metadata: price, outstanding shares and a classification label.
/// Missing values are representable and distinct from zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssetMeta {
    pub price: Option<f64>,
    pub outstanding: Option<f64>,
    pub category: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct AssetMetaTable {
    map: HashMap<String, AssetMeta>,
}

impl AssetMetaTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, asset: impl Into<String>, meta: AssetMeta) {
        self.map.insert(asset.into(), meta);
    }

    pub fn get(&self, asset: &str) -> Option<&AssetMeta> {
        self.map.get(asset)
    }

    pub fn price(&self, asset: &str) -> Option<f64> {
        self.map.get(asset).and_then(|m| m.price)
    }

    pub fn outstanding(&self, asset: &str) -> Option<f64> {
        self.map.get(asset).and_then(|m| m.outstanding)
    }

    /// Category label, with missing values bucketed as "other".
    pub fn category_or_other(&self, asset: &str) -> &str {
        self.map
            .get(asset)
            .and_then(|m| m.category.as_deref())
            .unwrap_or("other")
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Load from CSV with header `asset_id,price,outstanding,category`.
    /// Empty fields mean missing.
    pub fn load(reader: impl Read, source_name: &str) -> Result<AssetMetaTable> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let mut table = AssetMetaTable::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                path: source_name.into(),
                row: e.position().map(|p| p.line()).unwrap_or(0),
                msg: e.to_string(),
            })?;
            let row = record.position().map(|p| p.line()).unwrap_or(0);
            let parse_opt = |field: Option<&str>, name: &str| -> Result<Option<f64>> {
                match field.map(str::trim) {
                    None | Some("") => Ok(None),
                    Some(raw) => raw.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                        path: source_name.into(),
                        row,
                        msg: format!("unparseable {name} {raw:?}"),
                    }),
                }
            };
            let price = parse_opt(record.get(1), "price")?;
            let outstanding = parse_opt(record.get(2), "outstanding")?;
            if let Some(p) = price {
                if p < 0.0 {
                    return Err(Error::Parse {
                        path: source_name.into(),
                        row,
                        msg: format!("negative price {p}"),
                    });
                }
            }
            if let Some(o) = outstanding {
                if o <= 0.0 {
                    return Err(Error::Parse {
                        path: source_name.into(),
                        row,
                        msg: format!("outstanding must be positive, got {o}"),
                    });
                }
            }
            let category = record
                .get(3)
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .map(str::to_owned);
            table.insert(
                record[0].to_owned(),
                AssetMeta {
                    price,
                    outstanding,
                    category,
                },
            );
        }
        Ok(table)
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<AssetMetaTable> {
        let path = path.as_ref();
        let file =
            std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::load(file, &path.display().to_string())
    }
}

/// Holder id to institution-type label (e.g. HF, IA, MF).
#[derive(Debug, Clone, Default)]
pub struct HolderMetaTable {
    map: HashMap<String, String>,
}

impl HolderMetaTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, holder: impl Into<String>, kind: impl Into<String>) {
        self.map.insert(holder.into(), kind.into());
    }

    pub fn kind(&self, holder: &str) -> Option<&str> {
        self.map.get(holder).map(String::as_str)
    }

    pub fn kind_or_other(&self, holder: &str) -> &str {
        self.kind(holder).unwrap_or("other")
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Load from CSV with header `holder_id,type`.
    pub fn load(reader: impl Read, source_name: &str) -> Result<HolderMetaTable> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let mut table = HolderMetaTable::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                path: source_name.into(),
                row: e.position().map(|p| p.line()).unwrap_or(0),
                msg: e.to_string(),
            })?;
            table.insert(record[0].to_owned(), record[1].trim().to_owned());
        }
        Ok(table)
    }

    pub fn load_from_path(path: impl AsRef<Path>) -> Result<HolderMetaTable> {
        let path = path.as_ref();
        let file =
            std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::load(file, &path.display().to_string())
    }
}

/// Per-date external market returns, `date,return` CSV.
pub fn load_market_returns(reader: impl Read, source_name: &str) -> Result<HashMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let mut out = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            path: source_name.into(),
            row: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let ret: f64 = record[1].trim().parse().map_err(|_| Error::Parse {
            path: source_name.into(),
            row,
            msg: format!("unparseable return {:?}", &record[1]),
        })?;
        out.insert(record[0].to_owned(), ret);
    }
    Ok(out)
}
