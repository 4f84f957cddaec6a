//! Bird's-eye rendering of one record frame as an SVG document.
//!
//! Layout: an 80 m × 80 m scene panel centred on the ego vehicle with its heading pointing
//! up, and a dashboard panel to the right. All numbers are printed with fixed precision
//! and obstacles are drawn in id order, so equal frames give byte-equal documents.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{to_body_frame, Vec2};
use crate::mudrive::{format_number, PlannerParams};
use crate::trace::{
    LightColor, ObstacleKind, RawRecordFrame, Scene, Signal, AHEAD_LATERAL, EGO_HALF_LEN,
    EGO_HALF_WID, STOPPED_KMH,
};

pub const VIEW_M: f64 = 80.0;
pub const PX_PER_M: f64 = 5.0;
const PANEL: f64 = VIEW_M * PX_PER_M;
const DASH_W: f64 = 200.0;
const FRONT_STATIC_RANGE: f64 = 40.0;
pub const NEAR_BAND_M: f64 = 5.0;
pub const MID_BAND_M: f64 = 25.0;

pub fn kind_color(kind: ObstacleKind) -> &'static str {
    match kind {
        ObstacleKind::Vehicle => "#2ca02c",
        ObstacleKind::Pedestrian => "#e6c229",
        ObstacleKind::Cyclist => "#1f77b4",
        ObstacleKind::Unknown => "#9467bd",
    }
}

fn kind_name(kind: ObstacleKind) -> &'static str {
    match kind {
        ObstacleKind::Vehicle => "vehicle",
        ObstacleKind::Pedestrian => "pedestrian",
        ObstacleKind::Cyclist => "cyclist",
        ObstacleKind::Unknown => "unknown",
    }
}

pub fn light_color(c: Option<LightColor>) -> &'static str {
    match c {
        Some(LightColor::Red) => "#d62728",
        Some(LightColor::Yellow) => "#ffbf00",
        Some(LightColor::Green) => "#2ca02c",
        Some(LightColor::Off) | None => "#7f7f7f",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleBand {
    Near,
    Mid,
    Far,
    None,
}

impl ObstacleBand {
    pub fn of(dist: Option<f64>) -> Self {
        match dist {
            None => ObstacleBand::None,
            Some(d) if d < NEAR_BAND_M => ObstacleBand::Near,
            Some(d) if d < MID_BAND_M => ObstacleBand::Mid,
            Some(_) => ObstacleBand::Far,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ObstacleBand::Near => "near",
            ObstacleBand::Mid => "mid",
            ObstacleBand::Far => "far",
            ObstacleBand::None => "none",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "near" => ObstacleBand::Near,
            "mid" => ObstacleBand::Mid,
            "far" => ObstacleBand::Far,
            "none" => ObstacleBand::None,
            _ => return None,
        })
    }
}

/// Scene summary embedded in the image metadata, readable without rasterizing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentFeatures {
    pub light: Option<LightColor>,
    pub obstacle_band: ObstacleBand,
    pub in_junction: bool,
    pub front_static_vehicle: bool,
    pub stop_sign: bool,
}

impl MomentFeatures {
    pub fn from_frame(frame: &RawRecordFrame) -> Self {
        let scene = Scene::from_frame(frame);
        let origin = Vec2::new(frame.ego.x, frame.ego.y);
        let front_static = frame.obstacles.iter().any(|ob| {
            let (lon, lat) = to_body_frame(origin, frame.ego.heading, Vec2::new(ob.x, ob.y));
            lon > 0.0
                && lat.abs() < AHEAD_LATERAL
                && lon < FRONT_STATIC_RANGE
                && ob.speed < STOPPED_KMH
                && ob.kind == ObstacleKind::Vehicle
        });
        let nearest = (!frame.obstacles.is_empty()).then(|| scene.get(Signal::NearestNpcDist));
        MomentFeatures {
            light: frame.traffic_light.as_ref().map(|tl| tl.color),
            obstacle_band: ObstacleBand::of(nearest),
            in_junction: frame.map_ctx.in_junction,
            front_static_vehicle: front_static,
            stop_sign: frame.map_ctx.dist_to_stop_sign <= VIEW_M / 2.0,
        }
    }

    fn to_element(&self) -> String {
        format!(
            "<moment xmlns=\"urn:drive-repair:moment\" light=\"{}\" obstacle_band=\"{}\" in_junction=\"{}\" front_static_vehicle=\"{}\" stop_sign=\"{}\"/>",
            self.light.map_or("none", LightColor::as_str),
            self.obstacle_band.as_str(),
            self.in_junction,
            self.front_static_vehicle,
            self.stop_sign
        )
    }

    /// Reads the summary back from a document produced by [`render_moment`].
    pub fn from_svg(svg: &str) -> Option<Self> {
        let start = svg.find("<moment ")?;
        let end = start + svg[start..].find("/>")?;
        let el = &svg[start..end];
        let attr = |name: &str| -> Option<&str> {
            let key = format!(" {name}=\"");
            let i = el.find(&key)? + key.len();
            let j = i + el[i..].find('"')?;
            Some(&el[i..j])
        };
        let light = match attr("light")? {
            "none" => None,
            "red" => Some(LightColor::Red),
            "yellow" => Some(LightColor::Yellow),
            "green" => Some(LightColor::Green),
            "off" => Some(LightColor::Off),
            _ => return None,
        };
        Some(MomentFeatures {
            light,
            obstacle_band: ObstacleBand::parse(attr("obstacle_band")?)?,
            in_junction: attr("in_junction")?.parse().ok()?,
            front_static_vehicle: attr("front_static_vehicle")?.parse().ok()?,
            stop_sign: attr("stop_sign")?.parse().ok()?,
        })
    }
}

/// Screen position of a body-frame offset: forward is up, left is left.
fn screen(lon: f64, lat: f64) -> (f64, f64) {
    (PANEL / 2.0 - lat * PX_PER_M, PANEL / 2.0 - lon * PX_PER_M)
}

fn polygon_points(pts: &[(f64, f64)]) -> String {
    let parts: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    parts.join(" ")
}

/// Screen corners of a box given in body-frame centre, relative heading and extents.
fn box_corners(lon: f64, lat: f64, rel_heading: f64, half_len: f64, half_wid: f64) -> Vec<(f64, f64)> {
    let (c, s) = (rel_heading.cos(), rel_heading.sin());
    [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        .iter()
        .map(|(a, b)| {
            let dl = a * half_len;
            let dw = b * half_wid;
            screen(lon + dl * c - dw * s, lat + dl * s + dw * c)
        })
        .collect()
}

fn in_view(lon: f64, lat: f64) -> bool {
    lon.abs() <= VIEW_M / 2.0 && lat.abs() <= VIEW_M / 2.0
}

pub fn render_moment(frame: &RawRecordFrame, params: &PlannerParams) -> String {
    let ego = &frame.ego;
    let origin = Vec2::new(ego.x, ego.y);
    let features = MomentFeatures::from_frame(frame);
    let mut s = String::new();
    let width = PANEL + DASH_W;
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.0}\" height=\"{PANEL:.0}\" viewBox=\"0 0 {width:.0} {PANEL:.0}\">"
    );
    let _ = writeln!(s, "<metadata>{}</metadata>", features.to_element());
    let _ = writeln!(
        s,
        "<rect class=\"scene-panel\" x=\"0\" y=\"0\" width=\"{PANEL:.0}\" height=\"{PANEL:.0}\" fill=\"#202428\"/>"
    );

    // Map features along the route ahead.
    let ctx = &frame.map_ctx;
    if let Some(tl) = &frame.traffic_light {
        let lon = tl.dist_to_stopline + EGO_HALF_LEN;
        if lon.abs() <= VIEW_M / 2.0 {
            let (x0, y) = screen(lon, 4.0);
            let (x1, _) = screen(lon, -4.0);
            let _ = writeln!(
                s,
                "<line class=\"stopline\" x1=\"{x0:.2}\" y1=\"{y:.2}\" x2=\"{x1:.2}\" y2=\"{y:.2}\" stroke=\"{}\" stroke-width=\"3\"/>",
                light_color(Some(tl.color))
            );
        }
    }
    if !ctx.in_junction && ctx.dist_to_junction + EGO_HALF_LEN <= VIEW_M / 2.0 {
        let (_, y) = screen(ctx.dist_to_junction + EGO_HALF_LEN, 0.0);
        let _ = writeln!(
            s,
            "<rect class=\"junction\" x=\"0\" y=\"0\" width=\"{PANEL:.0}\" height=\"{:.2}\" fill=\"#ffffff\" fill-opacity=\"0.08\"/>",
            y.max(0.0)
        );
    } else if ctx.in_junction {
        let _ = writeln!(
            s,
            "<rect class=\"junction\" x=\"0\" y=\"0\" width=\"{PANEL:.0}\" height=\"{PANEL:.0}\" fill=\"#ffffff\" fill-opacity=\"0.08\"/>"
        );
    }
    if features.stop_sign {
        let (x, y) = screen(ctx.dist_to_stop_sign + EGO_HALF_LEN, -4.0);
        let _ = writeln!(
            s,
            "<g class=\"stop-sign\"><circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"7\" fill=\"#d62728\"/><text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"6\" text-anchor=\"middle\" fill=\"#ffffff\">STOP</text></g>",
            y + 2.0
        );
    }

    let mut obstacles: Vec<_> = frame.obstacles.iter().collect();
    obstacles.sort_by(|a, b| a.id.cmp(&b.id));
    for ob in obstacles {
        let (lon, lat) = to_body_frame(origin, ego.heading, Vec2::new(ob.x, ob.y));
        let color = kind_color(ob.kind);
        let dist = lon.hypot(lat);
        let corners = box_corners(lon, lat, ob.heading - ego.heading, ob.half_len, ob.half_wid);
        let _ = writeln!(s, "<g class=\"obstacle {}\" data-id=\"{}\">", kind_name(ob.kind), xml_escape(&ob.id));
        if !ob.predicted.is_empty() {
            let mut pts = vec![screen(lon, lat)];
            for p in &ob.predicted {
                let (pl, pt) = to_body_frame(origin, ego.heading, Vec2::new(p.x, p.y));
                pts.push(screen(pl, pt));
            }
            let _ = writeln!(
                s,
                "<polyline class=\"prediction\" points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-dasharray=\"4 3\"/>",
                polygon_points(&pts)
            );
        }
        let _ = writeln!(
            s,
            "<polygon class=\"glyph\" points=\"{}\" fill=\"{color}\" fill-opacity=\"0.25\" stroke=\"{color}\" stroke-width=\"2\"/>",
            polygon_points(&corners)
        );
        let (tx, ty) = screen(lon, lat);
        let (tx, ty) = if in_view(lon, lat) {
            (tx + ob.half_wid.max(1.0) * PX_PER_M + 3.0, ty)
        } else {
            (tx.clamp(4.0, PANEL - 60.0), ty.clamp(10.0, PANEL - 14.0))
        };
        let _ = writeln!(
            s,
            "<text class=\"label\" x=\"{tx:.2}\" y=\"{ty:.2}\" font-size=\"9\" fill=\"#ffffff\">{dist:.1}m</text>"
        );
        let _ = writeln!(
            s,
            "<text class=\"label\" x=\"{tx:.2}\" y=\"{:.2}\" font-size=\"9\" fill=\"#ffffff\">{:.1}km/h</text>",
            ty + 10.0,
            ob.speed
        );
        s.push_str("</g>\n");
    }

    let ego_corners = box_corners(0.0, 0.0, 0.0, EGO_HALF_LEN, EGO_HALF_WID);
    let _ = writeln!(
        s,
        "<polygon class=\"glyph ego\" points=\"{}\" fill=\"#1f4e9c\" stroke=\"#9ecae1\" stroke-width=\"2\"/>",
        polygon_points(&ego_corners)
    );

    // Dashboard.
    let light = frame.traffic_light.as_ref().map(|tl| tl.color);
    let dx = PANEL + 16.0;
    let _ = writeln!(
        s,
        "<rect class=\"dashboard\" x=\"{PANEL:.0}\" y=\"0\" width=\"{DASH_W:.0}\" height=\"{PANEL:.0}\" fill=\"#f4f4f4\"/>"
    );
    let _ = writeln!(
        s,
        "<circle class=\"light\" cx=\"{:.2}\" cy=\"40.00\" r=\"16\" fill=\"{}\" stroke=\"#333333\"/>",
        PANEL + DASH_W / 2.0,
        light_color(light)
    );
    let lines = [
        format!("Light: {}", light.map_or("none", LightColor::as_str)),
        format!("Speed: {:.1} km/h", ego.speed),
        format!("Steering: {:.1} deg", ego.steering),
        format!("Gear: {}", ego.gear.as_str()),
        format!("Max speed: {} km/h", format_number(params.cruise_speed_kmh)),
    ];
    for (i, line) in lines.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text class=\"dash\" x=\"{dx:.2}\" y=\"{:.2}\" font-size=\"13\" fill=\"#111111\">{}</text>",
            80.0 + 22.0 * i as f64,
            xml_escape(line)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
