//! Built-in reproduction scenarios.
//!
//! Each builtin is a scenario family: a base scenario text plus labeled
//! override sets, one per member run. Desk-scale sizing: 11-way x 256-set
//! LLC (DCA ways 0-1, inclusive ways 9-10), 8-way x 32-set MLCs, so one
//! LLC way holds 256 lines and one MLC 256 lines.

use crate::error::ConfigError;

#[derive(Debug, Clone)]
pub struct BuiltinRun {
    pub label: String,
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Builtin {
    pub name: &'static str,
    pub description: &'static str,
    pub base: String,
    pub runs: Vec<BuiltinRun>,
}

pub const BUILTIN_NAMES: &[&str] = &[
    "fig3a_sweep",
    "fig3b_sweep",
    "fig4_dca_off",
    "fig5_overlap_exclude",
    "fig6a_selective_dca",
    "fig6b_trash_shrink",
    "hpw_heavy",
    "lpw_heavy",
];

fn base_header(controller: bool, migrate_non_io: bool) -> String {
    format!(
        "\
[sim]
epochs_per_tick = 100
total_ticks = 70
warmup_ticks = 10
seed = 42
controller = {}
cores = 8

[llc]
sets = 256
ways = 11
dca_ways = 2
inclusive_ways = 2
migrate_non_io = {}

[mlc]
sets = 16
ways = 8
",
        if controller { "on" } else { "off" },
        if migrate_non_io { "on" } else { "off" }
    )
}

/// Touching or non-touching receive loop: 4 cores, 32-slot rings, 16
/// payload lines per packet (1KB packets). The ring footprint (2048
/// payload lines) rewrites the 512-frame DCA region several times per
/// epoch, so streamer lines filled there die before their next reuse. The
/// streamer working set (512 lines) fits two clean ways plus its MLCs.
/// Non-I/O migration is off here so the streamer's residency follows its
/// mask; I/O lines still migrate, which is what the inclusive-way sweep
/// positions measure.
fn rx_sweep_base(touch: bool) -> String {
    format!(
        "{}
[device nic]
kind = network
lines_per_epoch = 2048
dca = on

[workload net]
kind = net_rx
priority = high
cores = 0,1,2,3
device = nic
ring_entries = {}
lines_per_packet = 16
touch = {}
mask = 5:6

[workload xmem]
kind = mem_stream
priority = high
cores = 4,5
working_set_lines = 448
pattern = sequential
op = read
accesses_per_epoch = 256
mask = 3:4
",
        base_header(false, false),
        // The touching loop needs ring depth for payload churn; the
        // non-touching loop only keeps a descriptor footprint.
        if touch { 16 } else { 8 },
        if touch { "on" } else { "off" }
    )
}

fn mask_sweep_runs() -> Vec<BuiltinRun> {
    (0..10)
        .map(|lo| BuiltinRun {
            label: format!("mask_{lo}_{}", lo + 1),
            overrides: vec![format!("workload xmem.mask={lo}:{}", lo + 1)],
        })
        .collect()
}

pub fn builtin_scenario(name: &str) -> Result<Builtin, ConfigError> {
    match name {
        "fig3a_sweep" => Ok(Builtin {
            name: "fig3a_sweep",
            description: "non-touching rx vs memory streamer, 2-way mask swept across the LLC",
            base: rx_sweep_base(false),
            runs: mask_sweep_runs(),
        }),
        "fig3b_sweep" => Ok(Builtin {
            name: "fig3b_sweep",
            description: "touching rx vs memory streamer, 2-way mask swept across the LLC",
            base: rx_sweep_base(true),
            runs: mask_sweep_runs(),
        }),
        "fig4_dca_off" => Ok(Builtin {
            name: "fig4_dca_off",
            description: "inclusive-way contention with the net device's DCA on vs off",
            base: rx_sweep_base(true),
            runs: vec![
                BuiltinRun {
                    label: "incl_dca_on".into(),
                    overrides: vec!["workload xmem.mask=9:10".into()],
                },
                BuiltinRun {
                    label: "incl_dca_off".into(),
                    overrides: vec![
                        "workload xmem.mask=9:10".into(),
                        "device nic.dca=off".into(),
                    ],
                },
                BuiltinRun {
                    label: "base_dca_on".into(),
                    overrides: vec!["workload xmem.mask=3:4".into()],
                },
                BuiltinRun {
                    label: "base_dca_off".into(),
                    overrides: vec![
                        "workload xmem.mask=3:4".into(),
                        "device nic.dca=off".into(),
                    ],
                },
            ],
        }),
        "fig5_overlap_exclude" => Ok(Builtin {
            name: "fig5_overlap_exclude",
            description: "rx allocation excluding vs overlapping inclusive ways",
            base: format!(
                "{}
[device nic]
kind = network
lines_per_epoch = 1024
dca = on

[workload net]
kind = net_rx
priority = high
cores = 0,1,2,3
device = nic
ring_entries = 36
lines_per_packet = 16
touch = on
mask = 7:8
",
                base_header(false, true)
            ),
            runs: vec![
                BuiltinRun {
                    label: "exclude_2".into(),
                    overrides: vec!["workload net.mask=7:8".into()],
                },
                BuiltinRun {
                    label: "overlap_4".into(),
                    overrides: vec!["workload net.mask=7:10".into()],
                },
                BuiltinRun {
                    label: "exclude_4".into(),
                    overrides: vec!["workload net.mask=5:8".into()],
                },
                BuiltinRun {
                    label: "overlap_6".into(),
                    overrides: vec!["workload net.mask=5:10".into()],
                },
            ],
        }),
        "fig6a_selective_dca" => Ok(Builtin {
            name: "fig6a_selective_dca",
            description: "storage stream vs touching rx; selective storage DCA disable",
            base: format!(
                "{}
[device nic]
kind = network
lines_per_epoch = 1024
dca = on

[device ssd]
kind = storage
lines_per_epoch = 1024
dca = on

[workload net]
kind = net_rx
priority = high
cores = 0,1
device = nic
ring_entries = 32
lines_per_packet = 16
touch = on
mask = 4:5

[workload fio]
kind = storage_stream
priority = low
cores = 2,3
device = ssd
block_lines = 256
queue_depth = 4
fresh_buffers = on
process_reads_per_line = 1
mask = 2:3
",
                base_header(false, true)
            ),
            runs: vec![
                BuiltinRun {
                    label: "net_alone".into(),
                    overrides: vec!["device ssd.lines_per_epoch=0".into()],
                },
                BuiltinRun {
                    label: "dca_on".into(),
                    overrides: vec![],
                },
                BuiltinRun {
                    label: "ssd_dca_off".into(),
                    overrides: vec!["device ssd.dca=off".into()],
                },
            ],
        }),
        "fig6b_trash_shrink" => Ok(Builtin {
            name: "fig6b_trash_shrink",
            description: "storage bloat ways shrink from 4 overlapping ways to 1",
            base: format!(
                "{}
[device ssd]
kind = storage
lines_per_epoch = 1024
dca = off

[workload fio]
kind = storage_stream
priority = low
cores = 0,1
device = ssd
block_lines = 256
queue_depth = 4
fresh_buffers = on
process_reads_per_line = 1
mask = 2:5

[workload xmem]
kind = mem_stream
priority = high
cores = 2,3
working_set_lines = 1536
pattern = random
op = read
accesses_per_epoch = 256
mask = 2:5
",
                base_header(false, true)
            ),
            runs: (2..=5)
                .rev()
                .map(|n| BuiltinRun {
                    label: format!("storage_ways_2_{n}"),
                    overrides: vec![format!("workload fio.mask=2:{n}")],
                })
                .collect(),
        }),
        "hpw_heavy" => Ok(Builtin {
            name: "hpw_heavy",
            description: "controller scenario: 3 HPWs with storage and memory antagonists",
            base: format!(
                "{}
[device nic]
kind = network
lines_per_epoch = 1024
dca = on

[device ssd]
kind = storage
lines_per_epoch = 1024
dca = on

[workload net]
kind = net_rx
priority = high
cores = 0,1
device = nic
ring_entries = 32
lines_per_packet = 16
touch = on

[workload xmem_a]
kind = mem_stream
priority = high
cores = 2
working_set_lines = 384
pattern = sequential
op = read
accesses_per_epoch = 256

[workload xmem_b]
kind = mem_stream
priority = high
cores = 3
working_set_lines = 384
pattern = sequential
op = read
accesses_per_epoch = 256

[workload fio]
kind = storage_stream
priority = low
cores = 4,5
device = ssd
block_lines = 256
queue_depth = 4
fresh_buffers = on
process_reads_per_line = 1

[workload xmem_rand]
kind = mem_stream
priority = low
cores = 6
working_set_lines = 65536
pattern = random
op = read
accesses_per_epoch = 256

[workload xmem_lp]
kind = mem_stream
priority = low
cores = 7
working_set_lines = 192
pattern = sequential
op = read
accesses_per_epoch = 256
",
                base_header(true, true)
            ),
            runs: vec![
                BuiltinRun {
                    label: "managed".into(),
                    overrides: vec![],
                },
                BuiltinRun {
                    label: "unmanaged".into(),
                    overrides: vec!["sim.controller=off".into()],
                },
            ],
        }),
        "lpw_heavy" => Ok(Builtin {
            name: "lpw_heavy",
            description: "controller scenario: 2 HPWs and 4 LPWs",
            base: format!(
                "{}
[device nic]
kind = network
lines_per_epoch = 1024
dca = on

[device ssd]
kind = storage
lines_per_epoch = 1024
dca = on

[workload net]
kind = net_rx
priority = high
cores = 0,1
device = nic
ring_entries = 32
lines_per_packet = 16
touch = on

[workload xmem_a]
kind = mem_stream
priority = high
cores = 2
working_set_lines = 384
pattern = sequential
op = read
accesses_per_epoch = 256

[workload fio]
kind = storage_stream
priority = low
cores = 3,4
device = ssd
block_lines = 256
queue_depth = 4
fresh_buffers = on
process_reads_per_line = 1

[workload xmem_rand]
kind = mem_stream
priority = low
cores = 5
working_set_lines = 65536
pattern = random
op = read
accesses_per_epoch = 256

[workload xmem_lp1]
kind = mem_stream
priority = low
cores = 6
working_set_lines = 192
pattern = sequential
op = read
accesses_per_epoch = 256

[workload xmem_lp2]
kind = mem_stream
priority = low
cores = 7
working_set_lines = 256
pattern = sequential
op = read
accesses_per_epoch = 256
",
                base_header(true, true)
            ),
            runs: vec![
                BuiltinRun {
                    label: "managed".into(),
                    overrides: vec![],
                },
                BuiltinRun {
                    label: "unmanaged".into(),
                    overrides: vec!["sim.controller=off".into()],
                },
            ],
        }),
        other => Err(ConfigError::Scenario(format!("unknown builtin `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario_with_overrides;

    #[test]
    fn all_builtins_parse_and_validate() {
        for name in BUILTIN_NAMES {
            let b = builtin_scenario(name).unwrap();
            assert!(!b.runs.is_empty());
            for run in &b.runs {
                let (scenario, warnings) =
                    parse_scenario_with_overrides(&b.base, &run.overrides, true)
                        .unwrap_or_else(|e| panic!("{name}/{}: {e}", run.label));
                assert!(warnings.is_empty());
                scenario.validate().unwrap();
            }
        }
    }

    #[test]
    fn unknown_builtin_rejected() {
        assert!(builtin_scenario("fig99").is_err());
    }

    #[test]
    fn sweep_masks_cover_the_llc() {
        let b = builtin_scenario("fig3b_sweep").unwrap();
        assert_eq!(b.runs.len(), 10);
        assert_eq!(b.runs[0].overrides[0], "workload xmem.mask=0:1");
        assert_eq!(b.runs[9].overrides[0], "workload xmem.mask=9:10");
    }
}
