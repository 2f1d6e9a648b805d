//! Scenario text format: `[section]` headers, `key = value` pairs, `#`
//! comments. Sections are `sim`, `llc`, `mlc`, `thresholds`,
//! `device <id>`, `workload <id>`, and `events`.
//!
//! Parsing is strict by default: unknown keys and sections are errors with
//! line numbers. `--lenient` downgrades unknown keys to warnings.

use std::collections::BTreeMap;

use crate::device::{DeviceKind, DeviceSpec};
use crate::engine::{Scenario, ScriptedEvent};
use crate::error::ParseError;
use crate::telemetry::DcaMissMetric;
use crate::workload::{
    MemOp, MemPattern, MemStreamParams, NetRxParams, Priority, StorageStreamParams, WorkloadKind,
    WorkloadSpec,
};

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

#[derive(Debug, Clone)]
struct Section {
    header_line: usize,
    keys: BTreeMap<String, Entry>,
    /// Insertion order of keys, for duplicate detection messages.
    raw_events: Vec<(usize, String)>,
}

impl Section {
    fn new(header_line: usize) -> Self {
        Section {
            header_line,
            keys: BTreeMap::new(),
            raw_events: Vec::new(),
        }
    }
}

/// Parsed-but-untyped scenario document. Overrides are applied here, before
/// typed building.
#[derive(Debug, Clone, Default)]
pub struct ScenarioDoc {
    sections: Vec<(String, Section)>,
}

impl ScenarioDoc {
    fn section(&self, name: &str) -> Option<&Section> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
    }

    fn section_mut(&mut self, name: &str) -> &mut Section {
        if !self.sections.iter().any(|(n, _)| n == name) {
            self.sections.push((name.to_string(), Section::new(0)));
        }
        self.sections
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s)
            .unwrap()
    }

    /// Applies one `section.key=value` override; the section may carry an
    /// id (`workload xmem.mask=5:6`). The key's line is reported as 0.
    pub fn set_override(&mut self, spec: &str) -> Result<(), ParseError> {
        let eq = spec.find('=').ok_or_else(|| ParseError::Syntax {
            line: 0,
            msg: format!("override `{spec}` missing `=`"),
        })?;
        let (path, value) = (spec[..eq].trim(), spec[eq + 1..].trim());
        let dot = path.rfind('.').ok_or_else(|| ParseError::Syntax {
            line: 0,
            msg: format!("override `{spec}` missing `.` separator"),
        })?;
        let (section, key) = (path[..dot].trim(), path[dot + 1..].trim());
        if section.is_empty() || key.is_empty() || value.is_empty() {
            return Err(ParseError::Syntax {
                line: 0,
                msg: format!("override `{spec}` is incomplete"),
            });
        }
        self.section_mut(section).keys.insert(
            key.to_string(),
            Entry {
                line: 0,
                value: value.to_string(),
            },
        );
        Ok(())
    }
}

pub fn parse_doc(text: &str) -> Result<ScenarioDoc, ParseError> {
    let mut doc = ScenarioDoc::default();
    let mut current: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner.strip_suffix(']').ok_or_else(|| ParseError::Syntax {
                line: line_no,
                msg: "unterminated section header".into(),
            })?;
            let name = name.trim().to_string();
            validate_section_name(&name, line_no)?;
            if doc.sections.iter().any(|(n, _)| *n == name) {
                return Err(ParseError::DuplicateSection {
                    line: line_no,
                    name,
                });
            }
            doc.sections.push((name, Section::new(line_no)));
            current = Some(doc.sections.len() - 1);
            continue;
        }
        let Some(idx) = current else {
            return Err(ParseError::Syntax {
                line: line_no,
                msg: format!("`{line}` outside any section"),
            });
        };
        let section_name = doc.sections[idx].0.clone();
        if section_name == "events" {
            doc.sections[idx]
                .1
                .raw_events
                .push((line_no, line.to_string()));
            continue;
        }
        let eq = line.find('=').ok_or_else(|| ParseError::Syntax {
            line: line_no,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = line[..eq].trim().to_string();
        let value = line[eq + 1..].trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(ParseError::Syntax {
                line: line_no,
                msg: "empty key or value".into(),
            });
        }
        doc.sections[idx].1.keys.insert(
            key,
            Entry {
                line: line_no,
                value,
            },
        );
    }
    Ok(doc)
}

fn validate_section_name(name: &str, line: usize) -> Result<(), ParseError> {
    let ok = matches!(name, "sim" | "llc" | "mlc" | "thresholds" | "events")
        || name
            .strip_prefix("device ")
            .map(|id| !id.trim().is_empty())
            .unwrap_or(false)
        || name
            .strip_prefix("workload ")
            .map(|id| !id.trim().is_empty())
            .unwrap_or(false);
    if ok {
        Ok(())
    } else {
        Err(ParseError::UnknownSection {
            line,
            name: name.to_string(),
        })
    }
}

struct KeyReader<'a> {
    section: &'a Section,
    allowed: Vec<&'static str>,
    used: Vec<String>,
}

impl<'a> KeyReader<'a> {
    fn new(section: &'a Section) -> Self {
        KeyReader {
            section,
            allowed: Vec::new(),
            used: Vec::new(),
        }
    }

    fn entry(&mut self, key: &'static str) -> Option<&'a Entry> {
        self.allowed.push(key);
        let e = self.section.keys.get(key);
        if e.is_some() {
            self.used.push(key.to_string());
        }
        e
    }

    fn finish(self, strict: bool, warnings: &mut Vec<String>) -> Result<(), ParseError> {
        for (key, entry) in &self.section.keys {
            if !self.allowed.contains(&key.as_str()) {
                if strict {
                    return Err(ParseError::UnknownKey {
                        line: entry.line,
                        key: key.clone(),
                    });
                }
                warnings.push(format!("line {}: ignoring unknown key `{key}`", entry.line));
            }
        }
        Ok(())
    }
}

fn bad(key: &str, e: &Entry, msg: &str) -> ParseError {
    ParseError::BadValue {
        line: e.line,
        key: key.to_string(),
        msg: format!("{msg}: `{}`", e.value),
    }
}

fn parse_u64(key: &str, e: &Entry) -> Result<u64, ParseError> {
    e.value.parse().map_err(|_| bad(key, e, "expected integer"))
}

fn parse_usize(key: &str, e: &Entry) -> Result<usize, ParseError> {
    e.value.parse().map_err(|_| bad(key, e, "expected integer"))
}

fn parse_f64(key: &str, e: &Entry) -> Result<f64, ParseError> {
    e.value.parse().map_err(|_| bad(key, e, "expected number"))
}

fn parse_bool(key: &str, e: &Entry) -> Result<bool, ParseError> {
    match e.value.as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, e, "expected on/off")),
    }
}

fn parse_cores(key: &str, e: &Entry) -> Result<Vec<usize>, ParseError> {
    e.value
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| bad(key, e, "expected comma-separated core list"))
}

fn parse_mask(key: &str, e: &Entry) -> Result<(usize, usize), ParseError> {
    let (lo, hi) = e
        .value
        .split_once(':')
        .ok_or_else(|| bad(key, e, "expected lo:hi"))?;
    let lo = lo.trim().parse().map_err(|_| bad(key, e, "bad lo"))?;
    let hi = hi.trim().parse().map_err(|_| bad(key, e, "bad hi"))?;
    Ok((lo, hi))
}

/// Parses and validates a scenario. Returns the scenario plus any lenient-
/// mode warnings.
pub fn parse_scenario(text: &str, strict: bool) -> Result<(Scenario, Vec<String>), ParseError> {
    let doc = parse_doc(text)?;
    build_scenario(&doc, strict)
}

/// Parse with `section.key=value` overrides applied before building.
pub fn parse_scenario_with_overrides(
    text: &str,
    overrides: &[String],
    strict: bool,
) -> Result<(Scenario, Vec<String>), ParseError> {
    let mut doc = parse_doc(text)?;
    for o in overrides {
        doc.set_override(o)?;
    }
    build_scenario(&doc, strict)
}

pub fn build_scenario(doc: &ScenarioDoc, strict: bool) -> Result<(Scenario, Vec<String>), ParseError> {
    let mut scenario = Scenario::default();
    let mut warnings = Vec::new();
    let mut geometry_lines: BTreeMap<&'static str, usize> = BTreeMap::new();

    if let Some(s) = doc.section("sim") {
        let mut r = KeyReader::new(s);
        if let Some(e) = r.entry("epochs_per_tick") {
            scenario.epochs_per_tick = parse_u64("epochs_per_tick", e)?;
        }
        if let Some(e) = r.entry("total_ticks") {
            scenario.total_ticks = parse_u64("total_ticks", e)?;
        }
        if let Some(e) = r.entry("warmup_ticks") {
            scenario.warmup_ticks = parse_u64("warmup_ticks", e)?;
        }
        if let Some(e) = r.entry("seed") {
            scenario.seed = parse_u64("seed", e)?;
        }
        if let Some(e) = r.entry("controller") {
            scenario.controller_enabled = parse_bool("controller", e)?;
        }
        if let Some(e) = r.entry("cores") {
            scenario.geometry.core_count = parse_usize("cores", e)?;
            geometry_lines.insert("cores", e.line);
        }
        if let Some(e) = r.entry("dca_miss_metric") {
            scenario.dca_miss_metric = match e.value.as_str() {
                "leak" => DcaMissMetric::Leak,
                "alloc_fraction" => DcaMissMetric::AllocFraction,
                _ => return Err(bad("dca_miss_metric", e, "expected leak|alloc_fraction")),
            };
        }
        if let Some(e) = r.entry("exclude_dca_for_nonio_hpw") {
            scenario.exclude_dca_for_nonio_hpw = parse_bool("exclude_dca_for_nonio_hpw", e)?;
        }
        if let Some(e) = r.entry("net_bloat_to_trash") {
            scenario.net_bloat_to_trash = parse_bool("net_bloat_to_trash", e)?;
        }
        if let Some(e) = r.entry("cost_mlc_hit") {
            scenario.cost.mlc_hit = parse_f64("cost_mlc_hit", e)?;
        }
        if let Some(e) = r.entry("cost_llc_hit") {
            scenario.cost.llc_hit = parse_f64("cost_llc_hit", e)?;
        }
        if let Some(e) = r.entry("cost_memory") {
            scenario.cost.memory = parse_f64("cost_memory", e)?;
        }
        r.finish(strict, &mut warnings)?;
    }

    if let Some(s) = doc.section("llc") {
        let mut r = KeyReader::new(s);
        if let Some(e) = r.entry("sets") {
            scenario.geometry.llc_sets = parse_usize("sets", e)?;
            geometry_lines.insert("llc_sets", e.line);
        }
        if let Some(e) = r.entry("ways") {
            scenario.geometry.llc_ways = parse_usize("ways", e)?;
            geometry_lines.insert("llc_ways", e.line);
        }
        if let Some(e) = r.entry("dca_ways") {
            scenario.geometry.dca_way_count = parse_usize("dca_ways", e)?;
            geometry_lines.insert("dca_ways", e.line);
        }
        if let Some(e) = r.entry("inclusive_ways") {
            scenario.geometry.inclusive_way_count = parse_usize("inclusive_ways", e)?;
            geometry_lines.insert("inclusive_ways", e.line);
        }
        if let Some(e) = r.entry("line_bytes") {
            scenario.geometry.line_bytes = parse_usize("line_bytes", e)?;
            geometry_lines.insert("line_bytes", e.line);
        }
        if let Some(e) = r.entry("migrate_non_io") {
            scenario.migrate_non_io = parse_bool("migrate_non_io", e)?;
        }
        r.finish(strict, &mut warnings)?;
    }

    if let Some(s) = doc.section("mlc") {
        let mut r = KeyReader::new(s);
        if let Some(e) = r.entry("sets") {
            scenario.geometry.mlc_sets = parse_usize("sets", e)?;
            geometry_lines.insert("mlc_sets", e.line);
        }
        if let Some(e) = r.entry("ways") {
            scenario.geometry.mlc_ways = parse_usize("ways", e)?;
            geometry_lines.insert("mlc_ways", e.line);
        }
        r.finish(strict, &mut warnings)?;
    }

    if let Some(s) = doc.section("thresholds") {
        let mut r = KeyReader::new(s);
        let t = &mut scenario.thresholds;
        // Accept both the hpw_ spelling and the hardware-counter table's
        // hwp_ spelling for T1.
        if let Some(e) = r.entry("hpw_llc_hit_thr") {
            t.hpw_llc_hit_thr = parse_f64("hpw_llc_hit_thr", e)?;
        }
        if let Some(e) = r.entry("hwp_llc_hit_thr") {
            t.hpw_llc_hit_thr = parse_f64("hwp_llc_hit_thr", e)?;
        }
        if let Some(e) = r.entry("dmalk_dca_ms_thr") {
            t.dmalk_dca_ms_thr = parse_f64("dmalk_dca_ms_thr", e)?;
        }
        if let Some(e) = r.entry("dmalk_io_tp_thr") {
            t.dmalk_io_tp_thr = parse_f64("dmalk_io_tp_thr", e)?;
        }
        if let Some(e) = r.entry("dmalk_llc_ms_thr") {
            t.dmalk_llc_ms_thr = parse_f64("dmalk_llc_ms_thr", e)?;
        }
        if let Some(e) = r.entry("ant_cache_miss_thr") {
            t.ant_cache_miss_thr = parse_f64("ant_cache_miss_thr", e)?;
        }
        if let Some(e) = r.entry("instability_thr") {
            t.instability_thr = parse_f64("instability_thr", e)?;
        }
        if let Some(e) = r.entry("stable_interval") {
            t.stable_interval = parse_u64("stable_interval", e)?;
        }
        if let Some(e) = r.entry("revert_interval") {
            t.revert_interval = parse_u64("revert_interval", e)?;
        }
        if let Some(e) = r.entry("expand_period") {
            t.expand_period = parse_u64("expand_period", e)?;
        }
        r.finish(strict, &mut warnings)?;
    }

    for (name, s) in &doc.sections {
        if let Some(id) = name.strip_prefix("device ") {
            let id = id.trim();
            let mut r = KeyReader::new(s);
            let kind = match r.entry("kind") {
                Some(e) => match e.value.as_str() {
                    "network" => DeviceKind::Network,
                    "storage" => DeviceKind::Storage,
                    _ => return Err(bad("kind", e, "expected network|storage")),
                },
                None => {
                    return Err(ParseError::Invariant {
                        line: s.header_line,
                        msg: format!("device {id} missing `kind`"),
                    })
                }
            };
            let mut spec = DeviceSpec {
                name: id.to_string(),
                kind,
                lines_per_epoch: 1024,
                dca_enabled: true,
            };
            if let Some(e) = r.entry("lines_per_epoch") {
                spec.lines_per_epoch = parse_u64("lines_per_epoch", e)?;
            }
            if let Some(e) = r.entry("dca") {
                spec.dca_enabled = parse_bool("dca", e)?;
            }
            r.finish(strict, &mut warnings)?;
            scenario.devices.push(spec);
        }
    }

    let mut device_ref_lines = Vec::new();
    for (name, s) in &doc.sections {
        if let Some(id) = name.strip_prefix("workload ") {
            let id = id.trim();
            let mut r = KeyReader::new(s);
            let kind_entry = r.entry("kind").cloned();
            let Some(kind_entry) = kind_entry else {
                return Err(ParseError::Invariant {
                    line: s.header_line,
                    msg: format!("workload {id} missing `kind`"),
                });
            };
            let mut spec = WorkloadSpec {
                name: id.to_string(),
                kind: WorkloadKind::MemStream(MemStreamParams::default()),
                priority: Priority::High,
                cores: vec![0],
                device: None,
                initial_mask: None,
                starts_active: true,
            };
            if let Some(e) = r.entry("priority") {
                spec.priority = match e.value.as_str() {
                    "high" => Priority::High,
                    "low" => Priority::Low,
                    _ => return Err(bad("priority", e, "expected high|low")),
                };
            }
            if let Some(e) = r.entry("cores") {
                spec.cores = parse_cores("cores", e)?;
            }
            let device_entry = r.entry("device").cloned();
            if let Some(e) = &device_entry {
                spec.device = Some(e.value.clone());
            }
            if let Some(e) = r.entry("mask") {
                spec.initial_mask = Some(parse_mask("mask", e)?);
            }
            spec.kind = match kind_entry.value.as_str() {
                "net_rx" => {
                    let mut p = NetRxParams::default();
                    if let Some(e) = r.entry("ring_entries") {
                        p.ring_entries = parse_usize("ring_entries", e)?;
                    }
                    if let Some(e) = r.entry("lines_per_packet") {
                        p.lines_per_packet = parse_usize("lines_per_packet", e)?;
                    }
                    if let Some(e) = r.entry("touch") {
                        p.touch = parse_bool("touch", e)?;
                    }
                    if let Some(e) = r.entry("packets_per_epoch") {
                        p.packets_per_epoch = Some(parse_u64("packets_per_epoch", e)?);
                    }
                    WorkloadKind::NetRx(p)
                }
                "storage_stream" => {
                    let mut p = StorageStreamParams::default();
                    if let Some(e) = r.entry("block_lines") {
                        p.block_lines = parse_usize("block_lines", e)?;
                    }
                    if let Some(e) = r.entry("queue_depth") {
                        p.queue_depth = parse_usize("queue_depth", e)?;
                    }
                    if let Some(e) = r.entry("fresh_buffers") {
                        p.fresh_buffers = parse_bool("fresh_buffers", e)?;
                    }
                    if let Some(e) = r.entry("process_reads_per_line") {
                        p.process_reads_per_line = parse_usize("process_reads_per_line", e)?;
                    }
                    if let Some(e) = r.entry("cpu_lines_per_epoch") {
                        p.cpu_lines_per_epoch = Some(parse_u64("cpu_lines_per_epoch", e)?);
                    }
                    WorkloadKind::StorageStream(p)
                }
                "mem_stream" => {
                    let mut p = MemStreamParams::default();
                    if let Some(e) = r.entry("working_set_lines") {
                        p.working_set_lines = parse_u64("working_set_lines", e)?;
                    }
                    if let Some(e) = r.entry("pattern") {
                        p.pattern = match e.value.as_str() {
                            "sequential" => MemPattern::Sequential,
                            "random" => MemPattern::Random,
                            _ => return Err(bad("pattern", e, "expected sequential|random")),
                        };
                    }
                    if let Some(e) = r.entry("op") {
                        p.op = match e.value.as_str() {
                            "read" => MemOp::Read,
                            "write" => MemOp::Write,
                            _ => return Err(bad("op", e, "expected read|write")),
                        };
                    }
                    if let Some(e) = r.entry("accesses_per_epoch") {
                        p.accesses_per_epoch = parse_u64("accesses_per_epoch", e)?;
                    }
                    WorkloadKind::MemStream(p)
                }
                _ => {
                    return Err(bad(
                        "kind",
                        &kind_entry,
                        "expected net_rx|storage_stream|mem_stream",
                    ))
                }
            };
            r.finish(strict, &mut warnings)?;
            device_ref_lines.push((
                scenario.workloads.len(),
                device_entry.map(|e| e.line).unwrap_or(s.header_line),
            ));
            scenario.workloads.push(spec);
        }
    }

    if let Some(s) = doc.section("events") {
        for (line, text) in &s.raw_events {
            let ev = parse_event(*line, text)?;
            if let ScriptedEvent::Launch { workload } = &ev.1 {
                if let Some(w) = scenario.workloads.iter_mut().find(|w| w.name == *workload) {
                    w.starts_active = false;
                }
            }
            scenario.scripted_events.push(ev);
        }
    }

    // Cross-field validation with best-effort line attribution.
    if let Err(e) = scenario.geometry.validate() {
        let msg = e.to_string();
        let line = *geometry_lines
            .get("dca_ways")
            .or_else(|| geometry_lines.get("inclusive_ways"))
            .or_else(|| geometry_lines.get("llc_ways"))
            .or_else(|| geometry_lines.values().next())
            .unwrap_or(&0);
        return Err(ParseError::Invariant { line, msg });
    }
    if let Err(e) = scenario.validate() {
        let msg = e.to_string();
        // Unresolved device references point at the `device =` line.
        for (widx, line) in &device_ref_lines {
            if let Some(dev) = &scenario.workloads[*widx].device {
                if scenario.device_index(dev).is_none() {
                    return Err(ParseError::UnresolvedReference {
                        line: *line,
                        name: dev.clone(),
                    });
                }
            }
        }
        return Err(ParseError::Invariant { line: 0, msg });
    }
    Ok((scenario, warnings))
}

fn parse_event(line: usize, text: &str) -> Result<(u64, ScriptedEvent), ParseError> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    let syntax = |msg: &str| ParseError::Syntax {
        line,
        msg: msg.to_string(),
    };
    if parts.len() < 3 {
        return Err(syntax("expected `<tick> <action> <target> [arg]`"));
    }
    let tick: u64 = parts[0]
        .parse()
        .map_err(|_| syntax("event tick must be an integer"))?;
    let ev = match parts[1] {
        "launch" => ScriptedEvent::Launch {
            workload: parts[2].to_string(),
        },
        "terminate" => ScriptedEvent::Terminate {
            workload: parts[2].to_string(),
        },
        "set_mask" => {
            if parts.len() != 4 {
                return Err(syntax("set_mask needs `<workload> <lo:hi>`"));
            }
            let (lo, hi) = parts[3]
                .split_once(':')
                .ok_or_else(|| syntax("mask must be lo:hi"))?;
            ScriptedEvent::SetMask {
                workload: parts[2].to_string(),
                lo: lo.parse().map_err(|_| syntax("bad mask lo"))?,
                hi: hi.parse().map_err(|_| syntax("bad mask hi"))?,
            }
        }
        "set_dca" => {
            if parts.len() != 4 {
                return Err(syntax("set_dca needs `<device> on|off`"));
            }
            ScriptedEvent::SetDca {
                device: parts[2].to_string(),
                enabled: match parts[3] {
                    "on" => true,
                    "off" => false,
                    _ => return Err(syntax("set_dca arg must be on|off")),
                },
            }
        }
        other => return Err(syntax(&format!("unknown event action `{other}`"))),
    };
    Ok((tick, ev))
}

/// Canonical text form: every field written explicitly. Parsing the output
/// yields an equal Scenario.
pub fn to_text(s: &Scenario) -> String {
    use std::fmt::Write;
    let mut t = String::new();
    let b = |v: bool| if v { "on" } else { "off" };
    writeln!(t, "[sim]").unwrap();
    writeln!(t, "epochs_per_tick = {}", s.epochs_per_tick).unwrap();
    writeln!(t, "total_ticks = {}", s.total_ticks).unwrap();
    writeln!(t, "warmup_ticks = {}", s.warmup_ticks).unwrap();
    writeln!(t, "seed = {}", s.seed).unwrap();
    writeln!(t, "controller = {}", b(s.controller_enabled)).unwrap();
    writeln!(t, "cores = {}", s.geometry.core_count).unwrap();
    writeln!(
        t,
        "dca_miss_metric = {}",
        match s.dca_miss_metric {
            DcaMissMetric::Leak => "leak",
            DcaMissMetric::AllocFraction => "alloc_fraction",
        }
    )
    .unwrap();
    writeln!(t, "exclude_dca_for_nonio_hpw = {}", b(s.exclude_dca_for_nonio_hpw)).unwrap();
    writeln!(t, "net_bloat_to_trash = {}", b(s.net_bloat_to_trash)).unwrap();
    writeln!(t, "cost_mlc_hit = {}", s.cost.mlc_hit).unwrap();
    writeln!(t, "cost_llc_hit = {}", s.cost.llc_hit).unwrap();
    writeln!(t, "cost_memory = {}", s.cost.memory).unwrap();
    writeln!(t, "\n[llc]").unwrap();
    writeln!(t, "sets = {}", s.geometry.llc_sets).unwrap();
    writeln!(t, "ways = {}", s.geometry.llc_ways).unwrap();
    writeln!(t, "dca_ways = {}", s.geometry.dca_way_count).unwrap();
    writeln!(t, "inclusive_ways = {}", s.geometry.inclusive_way_count).unwrap();
    writeln!(t, "line_bytes = {}", s.geometry.line_bytes).unwrap();
    writeln!(t, "migrate_non_io = {}", b(s.migrate_non_io)).unwrap();
    writeln!(t, "\n[mlc]").unwrap();
    writeln!(t, "sets = {}", s.geometry.mlc_sets).unwrap();
    writeln!(t, "ways = {}", s.geometry.mlc_ways).unwrap();
    writeln!(t, "\n[thresholds]").unwrap();
    let th = &s.thresholds;
    writeln!(t, "hpw_llc_hit_thr = {}", th.hpw_llc_hit_thr).unwrap();
    writeln!(t, "dmalk_dca_ms_thr = {}", th.dmalk_dca_ms_thr).unwrap();
    writeln!(t, "dmalk_io_tp_thr = {}", th.dmalk_io_tp_thr).unwrap();
    writeln!(t, "dmalk_llc_ms_thr = {}", th.dmalk_llc_ms_thr).unwrap();
    writeln!(t, "ant_cache_miss_thr = {}", th.ant_cache_miss_thr).unwrap();
    writeln!(t, "instability_thr = {}", th.instability_thr).unwrap();
    writeln!(t, "stable_interval = {}", th.stable_interval).unwrap();
    writeln!(t, "revert_interval = {}", th.revert_interval).unwrap();
    writeln!(t, "expand_period = {}", th.expand_period).unwrap();
    for d in &s.devices {
        writeln!(t, "\n[device {}]", d.name).unwrap();
        writeln!(t, "kind = {}", d.kind).unwrap();
        writeln!(t, "lines_per_epoch = {}", d.lines_per_epoch).unwrap();
        writeln!(t, "dca = {}", b(d.dca_enabled)).unwrap();
    }
    for w in &s.workloads {
        writeln!(t, "\n[workload {}]", w.name).unwrap();
        writeln!(t, "kind = {}", w.kind.name()).unwrap();
        writeln!(t, "priority = {}", w.priority).unwrap();
        let cores: Vec<String> = w.cores.iter().map(|c| c.to_string()).collect();
        writeln!(t, "cores = {}", cores.join(",")).unwrap();
        if let Some(d) = &w.device {
            writeln!(t, "device = {d}").unwrap();
        }
        if let Some((lo, hi)) = w.initial_mask {
            writeln!(t, "mask = {lo}:{hi}").unwrap();
        }
        match &w.kind {
            WorkloadKind::NetRx(p) => {
                writeln!(t, "ring_entries = {}", p.ring_entries).unwrap();
                writeln!(t, "lines_per_packet = {}", p.lines_per_packet).unwrap();
                writeln!(t, "touch = {}", b(p.touch)).unwrap();
                if let Some(pp) = p.packets_per_epoch {
                    writeln!(t, "packets_per_epoch = {pp}").unwrap();
                }
            }
            WorkloadKind::StorageStream(p) => {
                writeln!(t, "block_lines = {}", p.block_lines).unwrap();
                writeln!(t, "queue_depth = {}", p.queue_depth).unwrap();
                writeln!(t, "fresh_buffers = {}", b(p.fresh_buffers)).unwrap();
                writeln!(t, "process_reads_per_line = {}", p.process_reads_per_line).unwrap();
                if let Some(c) = p.cpu_lines_per_epoch {
                    writeln!(t, "cpu_lines_per_epoch = {c}").unwrap();
                }
            }
            WorkloadKind::MemStream(p) => {
                writeln!(t, "working_set_lines = {}", p.working_set_lines).unwrap();
                writeln!(
                    t,
                    "pattern = {}",
                    match p.pattern {
                        MemPattern::Sequential => "sequential",
                        MemPattern::Random => "random",
                    }
                )
                .unwrap();
                writeln!(
                    t,
                    "op = {}",
                    match p.op {
                        MemOp::Read => "read",
                        MemOp::Write => "write",
                    }
                )
                .unwrap();
                writeln!(t, "accesses_per_epoch = {}", p.accesses_per_epoch).unwrap();
            }
        }
    }
    if !s.scripted_events.is_empty() {
        writeln!(t, "\n[events]").unwrap();
        for (tick, ev) in &s.scripted_events {
            match ev {
                ScriptedEvent::Launch { workload } => writeln!(t, "{tick} launch {workload}").unwrap(),
                ScriptedEvent::Terminate { workload } => {
                    writeln!(t, "{tick} terminate {workload}").unwrap()
                }
                ScriptedEvent::SetMask { workload, lo, hi } => {
                    writeln!(t, "{tick} set_mask {workload} {lo}:{hi}").unwrap()
                }
                ScriptedEvent::SetDca { device, enabled } => {
                    writeln!(t, "{tick} set_dca {device} {}", if *enabled { "on" } else { "off" })
                        .unwrap()
                }
            }
        }
    }
    t
}
