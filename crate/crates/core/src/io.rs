//! Text formats for models and datasets, TOML configs, and run manifests.
//!
//! Model file, one statement per line:
//!
//! ```text
//! rcert-model 1
//! agents <n>
//! items <k>
//! trunk <w1> <w2> ...
//! ir-mode fractional|penalty-free
//! dummy-agent true|false
//! clip-payments true|false
//! seed <u64>
//! config-hash <hex>
//! layer <name> <inputs> <outputs> <activation>
//! w <inputs reals>          # repeated <outputs> times, one row each
//! b <outputs reals>
//! ...                       # trunk layers in order, then allocation, then payment
//! end
//! ```
//!
//! Reals are written as `{:.16e}`, which round-trips every finite `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::IoError;
use crate::net::{Activation, AuctionConfig, AuctionNet, BidProfile, DenseLayer, IrMode};

pub const MODEL_VERSION: u32 = 1;
pub const DATA_VERSION: u32 = 1;

const MODEL_MAGIC: &str = "rcert-model";
const DATA_MAGIC: &str = "rcert-data";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub net: AuctionNet,
    pub provenance: Provenance,
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_reals(out: &mut String, tag: &str, values: &[f64]) {
    out.push_str(tag);
    for &v in values {
        out.push(' ');
        out.push_str(&real(v));
    }
    out.push('\n');
}

pub fn model_to_string(model: &ModelFile) -> String {
    let net = &model.net;
    let c = &net.config;
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}");
    let _ = writeln!(out, "agents {}", c.n_agents);
    let _ = writeln!(out, "items {}", c.n_items);
    let widths: Vec<String> = c.trunk_widths.iter().map(|w| w.to_string()).collect();
    let _ = writeln!(out, "trunk {}", widths.join(" "));
    let _ = writeln!(out, "ir-mode {}", ir_tag(c.ir_mode));
    let _ = writeln!(out, "dummy-agent {}", c.allow_dummy_agent);
    let _ = writeln!(out, "clip-payments {}", net.clip_payments);
    let _ = writeln!(out, "seed {}", model.provenance.seed);
    let hash = if model.provenance.config_hash.is_empty() {
        "-"
    } else {
        &model.provenance.config_hash
    };
    let _ = writeln!(out, "config-hash {hash}");
    let named = net
        .trunk
        .iter()
        .map(|l| ("trunk", l))
        .chain([("allocation", &net.allocation), ("payment", &net.payment)]);
    for (name, layer) in named {
        let _ = writeln!(
            out,
            "layer {name} {} {} {}",
            layer.inputs,
            layer.outputs(),
            layer.activation.tag()
        );
        for o in 0..layer.outputs() {
            push_reals(&mut out, "w", layer.row(o));
        }
        push_reals(&mut out, "b", &layer.biases);
    }
    out.push_str("end\n");
    out
}

fn ir_tag(mode: IrMode) -> &'static str {
    match mode {
        IrMode::Fractional => "fractional",
        IrMode::PenaltyFree => "penalty-free",
    }
}

/// Line-oriented tokenizer that remembers byte offsets for diagnostics.
struct Lines<'a> {
    text: &'a str,
    pos: usize,
}

struct Line<'a> {
    offset: usize,
    text: &'a str,
}

impl<'a> Line<'a> {
    /// Tokens with their absolute byte offsets.
    fn tokens(&self) -> Vec<(usize, &'a str)> {
        let base = self.offset;
        let text = self.text;
        text.split_ascii_whitespace()
            .map(|t| (base + (t.as_ptr() as usize - text.as_ptr() as usize), t))
            .collect()
    }
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    /// Next non-blank, non-comment line.
    fn next(&mut self) -> Option<Line<'a>> {
        while self.pos < self.text.len() {
            let start = self.pos;
            let rest = &self.text[start..];
            let len = rest.find('\n').map_or(rest.len(), |i| i + 1);
            self.pos += len;
            let raw = rest[..len].trim_end_matches(['\n', '\r']);
            let trimmed = raw.trim_start();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Some(Line {
                offset: start + (raw.len() - trimmed.len()),
                text: trimmed,
            });
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<Line<'a>, IoError> {
        self.next().ok_or_else(|| parse_err(self.text.len(), format!("unexpected end of file, expected {what}")))
    }
}

fn parse_err(offset: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        offset,
        message: message.into(),
    }
}

fn parse_tok<T: std::str::FromStr>(tok: (usize, &str), what: &str) -> Result<T, IoError> {
    tok.1
        .parse()
        .map_err(|_| parse_err(tok.0, format!("invalid {what} `{}`", tok.1)))
}

/// A line `<key> <value...>`; returns the value tokens.
fn keyed<'a>(line: &Line<'a>, key: &str) -> Result<Vec<(usize, &'a str)>, IoError> {
    let toks = line.tokens();
    if toks.first().map(|t| t.1) != Some(key) {
        return Err(parse_err(line.offset, format!("expected `{key}`")));
    }
    Ok(toks[1..].to_vec())
}

fn single<'a>(line: &Line<'a>, key: &str) -> Result<(usize, &'a str), IoError> {
    let toks = keyed(line, key)?;
    match toks.as_slice() {
        [t] => Ok(*t),
        _ => Err(parse_err(line.offset, format!("`{key}` takes exactly one value"))),
    }
}

fn parse_bool(tok: (usize, &str)) -> Result<bool, IoError> {
    match tok.1 {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(parse_err(tok.0, format!("expected true or false, got `{other}`"))),
    }
}

fn check_header(lines: &mut Lines, magic: &str, version: u32) -> Result<(), IoError> {
    let line = lines.expect("header")?;
    let toks = line.tokens();
    match toks.as_slice() {
        [(_, m), (_, v)] if *m == magic => {
            if *v != version.to_string() {
                return Err(IoError::Version {
                    found: (*v).to_string(),
                    expected: version,
                });
            }
            Ok(())
        }
        _ => Err(parse_err(line.offset, format!("expected `{magic} {version}` header"))),
    }
}

fn reals(toks: &[(usize, &str)], expected: usize, line: &Line) -> Result<Vec<f64>, IoError> {
    if toks.len() != expected {
        return Err(parse_err(
            line.offset,
            format!("expected {expected} values, found {}", toks.len()),
        ));
    }
    toks.iter().map(|&t| parse_tok::<f64>(t, "real")).collect()
}

fn parse_layer(lines: &mut Lines, name: &str) -> Result<DenseLayer, IoError> {
    let line = lines.expect("layer")?;
    let toks = keyed(&line, "layer")?;
    let [n, i, o, a] = toks.as_slice() else {
        return Err(parse_err(line.offset, "expected `layer <name> <inputs> <outputs> <activation>`"));
    };
    if n.1 != name {
        return Err(parse_err(n.0, format!("expected layer `{name}`, found `{}`", n.1)));
    }
    let inputs: usize = parse_tok(*i, "input count")?;
    let outputs: usize = parse_tok(*o, "output count")?;
    let activation = Activation::from_tag(a.1)
        .ok_or_else(|| parse_err(a.0, format!("unknown activation `{}`", a.1)))?;
    let mut weights = Vec::with_capacity(inputs * outputs);
    for _ in 0..outputs {
        let line = lines.expect("weight row")?;
        let toks = keyed(&line, "w")?;
        weights.extend(reals(&toks, inputs, &line)?);
    }
    let line = lines.expect("bias row")?;
    let toks = keyed(&line, "b")?;
    let biases = reals(&toks, outputs, &line)?;
    Ok(DenseLayer {
        inputs,
        weights,
        biases,
        activation,
    })
}

pub fn model_from_str(text: &str) -> Result<ModelFile, IoError> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, MODEL_MAGIC, MODEL_VERSION)?;
    let n_agents: usize = parse_tok(single(&lines.expect("agents")?, "agents")?, "agent count")?;
    let n_items: usize = parse_tok(single(&lines.expect("items")?, "items")?, "item count")?;
    let line = lines.expect("trunk")?;
    let trunk_widths = keyed(&line, "trunk")?
        .into_iter()
        .map(|t| parse_tok::<usize>(t, "width"))
        .collect::<Result<Vec<_>, _>>()?;
    let tok = single(&lines.expect("ir-mode")?, "ir-mode")?;
    let ir_mode = match tok.1 {
        "fractional" => IrMode::Fractional,
        "penalty-free" => IrMode::PenaltyFree,
        other => return Err(parse_err(tok.0, format!("unknown ir mode `{other}`"))),
    };
    let allow_dummy_agent = parse_bool(single(&lines.expect("dummy-agent")?, "dummy-agent")?)?;
    let clip_payments = parse_bool(single(&lines.expect("clip-payments")?, "clip-payments")?)?;
    let seed: u64 = parse_tok(single(&lines.expect("seed")?, "seed")?, "seed")?;
    let hash = single(&lines.expect("config-hash")?, "config-hash")?.1;
    let config = AuctionConfig {
        n_agents,
        n_items,
        trunk_widths,
        ir_mode,
        allow_dummy_agent,
    };
    let mut trunk = Vec::with_capacity(config.trunk_widths.len());
    for _ in 0..config.trunk_widths.len() {
        trunk.push(parse_layer(&mut lines, "trunk")?);
    }
    let allocation = parse_layer(&mut lines, "allocation")?;
    let payment = parse_layer(&mut lines, "payment")?;
    let line = lines.expect("end")?;
    if line.text != "end" {
        return Err(parse_err(line.offset, "expected `end`"));
    }
    if let Some(extra) = lines.next() {
        return Err(parse_err(extra.offset, "trailing content after `end`"));
    }
    let net = AuctionNet::from_parts(config, trunk, allocation, payment, clip_payments)?;
    Ok(ModelFile {
        net,
        provenance: Provenance {
            seed,
            config_hash: if hash == "-" { String::new() } else { hash.to_string() },
        },
    })
}

pub fn save_model(path: &Path, model: &ModelFile) -> Result<(), IoError> {
    fs::write(path, model_to_string(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelFile, IoError> {
    model_from_str(&fs::read_to_string(path)?)
}

/// Dataset file: header, `shape <n> <k> <count> <seed>`, then one line of
/// `n·k` reals per profile.
pub fn dataset_to_string(data: &Dataset) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{DATA_MAGIC} {DATA_VERSION}");
    let _ = writeln!(
        out,
        "shape {} {} {} {}",
        data.n_agents,
        data.n_items,
        data.len(),
        data.seed
    );
    for p in &data.profiles {
        let row: Vec<String> = p.values.iter().map(|&v| real(v)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn dataset_from_str(text: &str) -> Result<Dataset, IoError> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, DATA_MAGIC, DATA_VERSION)?;
    let line = lines.expect("shape")?;
    let toks = keyed(&line, "shape")?;
    let [n, k, count, seed] = toks.as_slice() else {
        return Err(parse_err(line.offset, "expected `shape <n> <k> <count> <seed>`"));
    };
    let n_agents: usize = parse_tok(*n, "agent count")?;
    let n_items: usize = parse_tok(*k, "item count")?;
    let count: usize = parse_tok(*count, "profile count")?;
    let seed: u64 = parse_tok(*seed, "seed")?;
    let mut profiles = Vec::with_capacity(count);
    for _ in 0..count {
        let line = lines.expect("profile")?;
        let values = reals(&line.tokens(), n_agents * n_items, &line)?;
        profiles.push(BidProfile::new(n_agents, n_items, values)?);
    }
    if let Some(extra) = lines.next() {
        return Err(parse_err(extra.offset, "more profiles than declared"));
    }
    Ok(Dataset {
        n_agents,
        n_items,
        seed,
        profiles,
    })
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<(), IoError> {
    fs::write(path, dataset_to_string(data))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset, IoError> {
    dataset_from_str(&fs::read_to_string(path)?)
}

pub fn from_toml<T: DeserializeOwned>(text: &str) -> Result<T, IoError> {
    toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        parse_err(offset, e.message().to_string())
    })
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String, IoError> {
    toml::to_string(value).map_err(|e| IoError::Config(e.to_string()))
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    from_toml(&fs::read_to_string(path)?)
}

/// Hex SHA-256 of the concatenated byte strings, each prefixed by its
/// length so that boundaries matter.
pub fn content_hash<'a>(parts: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// What produced a set of outputs. Every CSV written by a run points back
/// at its manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    /// Serialized configuration the run used.
    pub config: String,
    /// Hash of the config and of every input file's bytes.
    pub input_hash: String,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: String, inputs: &[&[u8]]) -> Self {
        let input_hash = content_hash(
            std::iter::once(config.as_bytes()).chain(inputs.iter().copied()),
        );
        Self {
            command: command.to_string(),
            seed,
            config,
            input_hash,
            outputs: Vec::new(),
        }
    }

    /// First line of every CSV tied to this manifest.
    pub fn csv_comment(&self, manifest_path: &Path) -> String {
        format!(
            "# manifest={} hash={}",
            manifest_path.display(),
            self.input_hash
        )
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        fs::write(path, to_toml(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        load_toml(path)
    }
}
