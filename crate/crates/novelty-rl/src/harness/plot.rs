use std::fmt::Write as _;

use crate::env::{DISKS, DISK_RADIUS, MAZE_SIZE};
use crate::ppo::Trajectory;

const MARGIN: f64 = 20.0;
const SCALE: f64 = 20.0;

const PALETTE: &[&str] = [
    "#1b6ca8", "#d1495b", "#66a182", "#edae49", "#8d5a97", "#00798c", "#c08552", "#3d405b",
]
.as_slice();

fn px(x: f64) -> f64 {
    MARGIN + SCALE * x
}

/// The y axis points up in the maze and down in SVG.
fn py(y: f64) -> f64 {
    MARGIN + SCALE * (MAZE_SIZE - y)
}

/// Render evaluation trajectories over the maze as a self-contained SVG.
/// One color per policy, one polyline per episode; each path includes the
/// terminal state. The output is a pure function of the input, so reruns
/// produce identical bytes.
pub fn plot_trajectories(groups: &[(String, &[Trajectory])]) -> String {
    let side = 2.0 * MARGIN + SCALE * MAZE_SIZE;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {side:.3} {side:.3}\">"
    );
    let _ = writeln!(
        svg,
        "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\" fill=\"white\" stroke=\"black\"/>",
        px(0.0),
        py(MAZE_SIZE),
        SCALE * MAZE_SIZE,
        SCALE * MAZE_SIZE
    );
    for (_, (cx, cy), reward) in DISKS {
        let _ = writeln!(
            svg,
            "<circle cx=\"{:.3}\" cy=\"{:.3}\" r=\"{:.3}\" fill=\"#e8e8e8\" stroke=\"gray\"/>",
            px(cx),
            py(cy),
            SCALE * DISK_RADIUS
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.3}\" y=\"{:.3}\" font-size=\"10\" text-anchor=\"middle\">{:+}</text>",
            px(cx),
            py(cy) + 3.0,
            reward
        );
    }
    for (gi, (id, episodes)) in groups.iter().enumerate() {
        let color = PALETTE[gi % PALETTE.len()];
        for traj in episodes.iter() {
            let mut points = String::new();
            for s in traj.states.iter().chain(std::iter::once(&traj.final_state)) {
                if s.len() < 2 {
                    continue;
                }
                let _ = write!(points, "{:.3},{:.3} ", px(s[0]), py(s[1]));
            }
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1\" opacity=\"0.7\"><title>{id}</title></polyline>",
                points.trim_end()
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{:.3}\" y=\"{:.3}\" font-size=\"10\" fill=\"{color}\">{id}</text>",
            px(0.2),
            MARGIN - 6.0 + 11.0 * gi as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}
