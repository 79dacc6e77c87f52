//! Plain-text network descriptions.
//!
//! ```text
//! # comments start with '#'
//! [chain]
//! label = A
//! sites = 50
//! hopping = 1          # optional, default 1
//!
//! [joint]
//! a = A:50
//! b = B:1
//! amplitude_re = 0.7071067811865476
//! amplitude_im = 0     # optional, default 0
//!
//! [potential]          # on-site energy
//! site = A:50
//! value = -1
//!
//! [flux]
//! loop = A:50>B:1, B:1..50, B:50>C:50, C:50..1, C:1>A:50
//! phi = 0.25
//! ```
//!
//! Loop items are either a link `X:i>Y:j` or a walk `X:i..j` along one chain;
//! consecutive items must share their end and start site, and the loop must
//! close. An empty `[spin]` section marks the file as an XY spin network, in
//! which `hopping` and `amplitude_re` are read as exchange couplings `J`;
//! spin files may not contain `[flux]`, `[potential]` or imaginary amplitudes.
//! Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::net::{ChainSpec, Gauge, JointSpec, Loop, Network, SiteRef};
use crate::spinmap::{magnon_to_tbn, SpinChain, SpinJoint, SpinNetworkSpec};

/// One item of a loop path.
#[derive(Clone, Debug, PartialEq)]
pub enum LoopItem {
    Link(SiteRef, SiteRef),
    Walk { chain: String, from: usize, to: usize },
}

/// A flux threaded through a loop given by site references.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxSpec {
    pub items: Vec<LoopItem>,
    pub phi: f64,
}

/// On-site energy on one site.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSpec {
    pub site: SiteRef,
    pub value: f64,
}

/// Parsed contents of a network file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetworkDescription {
    pub spin: bool,
    pub chains: Vec<ChainSpec>,
    pub joints: Vec<JointSpec>,
    pub potentials: Vec<PotentialSpec>,
    pub fluxes: Vec<FluxSpec>,
}

impl FluxSpec {
    /// Resolves the items to a loop of global sites in `net`.
    pub fn resolve(&self, net: &Network) -> Result<Loop> {
        let mut sites: Vec<usize> = Vec::new();
        let push = |s: usize, sites: &mut Vec<usize>| -> Result<()> {
            match sites.last() {
                Some(&last) if last == s => Ok(()),
                Some(&last) if !net.has_bond(last, s) => Err(Error::InvalidLoop(format!(
                    "loop jumps from {} to {} without a bond",
                    site_name(net, last),
                    site_name(net, s)
                ))),
                _ => {
                    sites.push(s);
                    Ok(())
                }
            }
        };
        for item in &self.items {
            match item {
                LoopItem::Link(a, b) => {
                    let (u, v) = (net.site(a)?, net.site(b)?);
                    if let Some(&last) = sites.last() {
                        if last != u {
                            return Err(Error::InvalidLoop(format!(
                                "link {a}>{b} does not start where the loop stands ({})",
                                site_name(net, last)
                            )));
                        }
                    }
                    push(u, &mut sites)?;
                    push(v, &mut sites)?;
                }
                LoopItem::Walk { chain, from, to } => {
                    let step: Box<dyn Iterator<Item = usize>> = if from <= to {
                        Box::new(*from..=*to)
                    } else {
                        Box::new((*to..=*from).rev())
                    };
                    let first = net.site_index(chain, *from)?;
                    if let Some(&last) = sites.last() {
                        if last != first {
                            return Err(Error::InvalidLoop(format!(
                                "walk {chain}:{from}..{to} does not start where the loop stands ({})",
                                site_name(net, last)
                            )));
                        }
                    }
                    for local in step {
                        push(net.site_index(chain, local)?, &mut sites)?;
                    }
                }
            }
        }
        if sites.len() > 1 && sites.first() == sites.last() {
            sites.pop();
        } else {
            return Err(Error::InvalidLoop("loop does not return to its first site".into()));
        }
        Loop::through(&sites)
    }
}

fn site_name(net: &Network, g: usize) -> String {
    net.site_label(g)
        .map(|s| s.to_string())
        .unwrap_or_else(|_| g.to_string())
}

impl NetworkDescription {
    /// Builds the tight-binding network, threading every flux in `gauge`.
    /// Spin descriptions are mapped through their one-magnon sector.
    pub fn network(&self, gauge: Gauge) -> Result<Network> {
        if self.spin {
            return magnon_to_tbn(&self.spin_spec()?);
        }
        let mut net = Network::build(self.chains.clone(), self.joints.clone())?;
        for p in &self.potentials {
            net = net.with_onsite(&p.site, p.value)?;
        }
        for f in &self.fluxes {
            let lp = f.resolve(&net)?;
            net = net.thread_loop_flux(&lp, f.phi, gauge)?;
        }
        Ok(net)
    }

    /// The spin network of a `[spin]` description.
    pub fn spin_spec(&self) -> Result<SpinNetworkSpec> {
        if !self.spin {
            return Err(Error::InvalidParameter("not a spin network description".into()));
        }
        Ok(SpinNetworkSpec::new(
            self.chains
                .iter()
                .map(|c| SpinChain {
                    label: c.label.clone(),
                    n_sites: c.n_sites,
                    coupling: c.hopping,
                })
                .collect(),
            self.joints
                .iter()
                .map(|j| SpinJoint {
                    a: j.a.clone(),
                    b: j.b.clone(),
                    coupling: j.amplitude.re,
                })
                .collect(),
        ))
    }
}

type Section = (String, usize, BTreeMap<String, (usize, String)>);

/// Parses a network description.
pub fn parse_network(text: &str) -> Result<NetworkDescription> {
    let mut sections: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_err(line_no, "unterminated section header"))?
                .trim();
            sections.push((name.to_string(), line_no, BTreeMap::new()));
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        let Some((_, _, entries)) = sections.last_mut() else {
            return Err(parse_err(line_no, "key outside of any section"));
        };
        if entries.insert(key.to_string(), (line_no, value.to_string())).is_some() {
            return Err(parse_err(line_no, format!("duplicate key `{key}`")));
        }
    }

    let mut desc = NetworkDescription::default();
    for (name, line_no, mut entries) in sections {
        let mut take = |key: &str| entries.remove(key);
        match name.as_str() {
            "spin" => {
                if desc.spin {
                    return Err(parse_err(line_no, "repeated [spin] section"));
                }
                desc.spin = true;
            }
            "chain" => {
                let label = required(take("label"), line_no, "label")?.1;
                let sites = number::<usize>(required(take("sites"), line_no, "sites")?)?;
                let mut chain = ChainSpec::new(label, sites);
                if let Some(h) = take("hopping") {
                    chain.hopping = number::<f64>(h)?;
                }
                desc.chains.push(chain);
            }
            "joint" => {
                let a = site(required(take("a"), line_no, "a")?)?;
                let b = site(required(take("b"), line_no, "b")?)?;
                let re = number::<f64>(required(take("amplitude_re"), line_no, "amplitude_re")?)?;
                let im = match take("amplitude_im") {
                    Some(v) => number::<f64>(v)?,
                    None => 0.0,
                };
                desc.joints.push(JointSpec::new(a, b, C64::new(re, im)));
            }
            "potential" => {
                let s = site(required(take("site"), line_no, "site")?)?;
                let value = number::<f64>(required(take("value"), line_no, "value")?)?;
                desc.potentials.push(PotentialSpec { site: s, value });
            }
            "flux" => {
                let (loop_line, loop_text) = required(take("loop"), line_no, "loop")?;
                let items = parse_loop(&loop_text).map_err(|m| parse_err(loop_line, m))?;
                let phi = number::<f64>(required(take("phi"), line_no, "phi")?)?;
                desc.fluxes.push(FluxSpec { items, phi });
            }
            other => return Err(parse_err(line_no, format!("unknown section [{other}]"))),
        }
        if let Some((key, (l, _))) = entries.into_iter().next() {
            return Err(parse_err(l, format!("unknown key `{key}` in [{name}]")));
        }
    }
    if desc.spin {
        if !desc.fluxes.is_empty() || !desc.potentials.is_empty() {
            return Err(parse_err(0, "spin networks take no [flux] or [potential] sections"));
        }
        if desc.joints.iter().any(|j| j.amplitude.im != 0.0) {
            return Err(parse_err(0, "spin couplings must be real"));
        }
    }
    Ok(desc)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn required(v: Option<(usize, String)>, section_line: usize, key: &str) -> Result<(usize, String)> {
    v.ok_or_else(|| parse_err(section_line, format!("missing key `{key}`")))
}

fn number<T: std::str::FromStr>((line, text): (usize, String)) -> Result<T> {
    text.parse::<T>()
        .map_err(|_| parse_err(line, format!("cannot parse `{text}` as a number")))
}

fn site((line, text): (usize, String)) -> Result<SiteRef> {
    text.parse::<SiteRef>().map_err(|e| parse_err(line, e.to_string()))
}

fn parse_loop(text: &str) -> std::result::Result<Vec<LoopItem>, String> {
    let mut items = Vec::new();
    for raw in text.split(',') {
        let item = raw.trim();
        if let Some((a, b)) = item.split_once('>') {
            let a = a.parse::<SiteRef>().map_err(|e| e.to_string())?;
            let b = b.parse::<SiteRef>().map_err(|e| e.to_string())?;
            items.push(LoopItem::Link(a, b));
        } else if let Some((head, to)) = item.split_once("..") {
            let start = head.parse::<SiteRef>().map_err(|e| e.to_string())?;
            let to = to
                .trim()
                .parse::<usize>()
                .map_err(|_| format!("bad walk end in `{item}`"))?;
            items.push(LoopItem::Walk {
                chain: start.chain,
                from: start.site,
                to,
            });
        } else {
            return Err(format!("loop item `{item}` is neither `X:i>Y:j` nor `X:i..j`"));
        }
    }
    Ok(items)
}

/// Serializes a description in the format read by [`parse_network`].
pub fn write_network(desc: &NetworkDescription) -> String {
    let mut s = String::new();
    if desc.spin {
        let _ = writeln!(s, "[spin]\n");
    }
    for c in &desc.chains {
        let _ = writeln!(s, "[chain]\nlabel = {}\nsites = {}\nhopping = {}\n", c.label, c.n_sites, c.hopping);
    }
    for j in &desc.joints {
        let _ = writeln!(
            s,
            "[joint]\na = {}\nb = {}\namplitude_re = {}\namplitude_im = {}\n",
            j.a, j.b, j.amplitude.re, j.amplitude.im
        );
    }
    for p in &desc.potentials {
        let _ = writeln!(s, "[potential]\nsite = {}\nvalue = {}\n", p.site, p.value);
    }
    for f in &desc.fluxes {
        let items: Vec<String> = f
            .items
            .iter()
            .map(|i| match i {
                LoopItem::Link(a, b) => format!("{a}>{b}"),
                LoopItem::Walk { chain, from, to } => format!("{chain}:{from}..{to}"),
            })
            .collect();
        let _ = writeln!(s, "[flux]\nloop = {}\nphi = {}\n", items.join(", "), f.phi);
    }
    s
}

/// Describes a network built in code (chains, joints and potentials; link
/// phases are not representable and must be re-threaded as fluxes).
pub fn describe(net: &Network) -> NetworkDescription {
    NetworkDescription {
        spin: false,
        chains: net.chains().to_vec(),
        joints: net.joints().to_vec(),
        potentials: net
            .onsite()
            .map(|(u, value)| PotentialSpec {
                site: net.site_label(u).expect("on-site potentials sit on network sites"),
                value,
            })
            .collect(),
        fluxes: Vec::new(),
    }
}
