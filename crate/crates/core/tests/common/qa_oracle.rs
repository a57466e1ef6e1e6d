//! Brute-force ground truth for generated questions.
//!
//! Works from the scene's JSON form only, with its own phrase tables and
//! degree-based geometry, so it shares no logic with the library's generator.
//! Returns `None` for questions that are not well posed.

use serde_json::Value;

const MARGIN_DEG: f64 = 5.0;

const RELATIONS: [(&str, &str); 4] =
    [("at the right of", "right side"), ("at the left of", "left side"), ("above", "above"), ("below", "below")];

const VIEWER: [&str; 6] =
    ["in front of you", "at my right side", "behind you", "at my left side", "above you", "below you"];

const COLORS: [&str; 8] = ["red", "green", "blue", "yellow", "white", "black", "brown", "gray"];

const MATERIALS: [(&str, &str); 5] =
    [("wooden", "wood"), ("glass", "glass"), ("metal", "metal"), ("plastic", "plastic"), ("fabric", "fabric")];

const CATEGORIES: [&str; 10] =
    ["window", "door", "chair", "table", "tv", "picture", "vase", "whiteboard", "clock", "sofa"];

#[derive(Clone)]
struct Obj {
    id: u64,
    category: String,
    color: String,
    material: String,
    lon_deg: f64,
    lat_deg: f64,
}

struct Scene {
    kind: String,
    objects: Vec<Obj>,
}

fn load(scene: &Value) -> Scene {
    let objects = scene["objects"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| {
            let ll = o["lonlat"].as_array().unwrap();
            let (lon, lat) = (ll[0].as_f64().unwrap(), ll[1].as_f64().unwrap());
            // Recover angles from the unit vector rather than trusting the stored pair.
            let v = [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()];
            Obj {
                id: o["id"].as_u64().unwrap(),
                category: o["category"].as_str().unwrap().to_string(),
                color: o["color"].as_str().unwrap().to_string(),
                material: o["material"].as_str().unwrap().to_string(),
                lon_deg: v[1].atan2(v[0]).to_degrees(),
                lat_deg: v[2].asin().to_degrees(),
            }
        })
        .collect();
    Scene { kind: scene["scene_type"].as_str().unwrap().to_string(), objects }
}

fn signed_lon_diff(a: f64, b: f64) -> f64 {
    let mut d = a - b;
    while d > 180.0 {
        d -= 360.0;
    }
    while d <= -180.0 {
        d += 360.0;
    }
    d
}

/// Viewer sector, or `None` when within the margin of a sector edge.
fn sector(o: &Obj) -> Option<&'static str> {
    let lat = o.lat_deg;
    if (lat.abs() - 60.0).abs() < MARGIN_DEG {
        return None;
    }
    if lat > 60.0 {
        return Some("above you");
    }
    if lat < -60.0 {
        return Some("below you");
    }
    let lon = o.lon_deg;
    for edge in [45.0, -45.0, 135.0, -135.0] {
        if signed_lon_diff(lon, edge).abs() < MARGIN_DEG {
            return None;
        }
    }
    Some(if lon.abs() <= 45.0 {
        "in front of you"
    } else if lon > 45.0 && lon <= 135.0 {
        "at my right side"
    } else if lon < -45.0 && lon >= -135.0 {
        "at my left side"
    } else {
        "behind you"
    })
}

/// Relation of `a` to `b` as an answer word, or `None` near a tie.
fn relation(a: &Obj, b: &Obj) -> Option<&'static str> {
    let dlon = signed_lon_diff(a.lon_deg, b.lon_deg);
    let dlat = a.lat_deg - b.lat_deg;
    if (dlat.abs() - dlon.abs()).abs() < MARGIN_DEG {
        return None;
    }
    if dlat.abs() > dlon.abs() {
        return Some(if dlat > 0.0 { "above" } else { "below" });
    }
    if 180.0 - dlon.abs() < MARGIN_DEG {
        return None;
    }
    Some(if dlon > 0.0 { "right side" } else { "left side" })
}

enum Filter {
    Scene(String),
    Viewer(String),
    Rel { answer: &'static str, anchor: String, scene: Option<String> },
}

fn parse_filter(s: &str) -> Option<Filter> {
    if VIEWER.contains(&s) {
        return Some(Filter::Viewer(s.to_string()));
    }
    if let Some(rest) = s.strip_prefix("in the ") {
        return Some(Filter::Scene(rest.to_string()));
    }
    for (phrase, answer) in RELATIONS {
        if let Some(rest) = s.strip_prefix(phrase).and_then(|r| r.strip_prefix(" the ")) {
            let (anchor, scene) = match rest.split_once(" in the ") {
                Some((a, sc)) => (a, Some(sc.to_string())),
                None => (rest, None),
            };
            if !CATEGORIES.contains(&anchor) {
                return None;
            }
            return Some(Filter::Rel { answer, anchor: anchor.to_string(), scene });
        }
    }
    None
}

/// Objects among `pool` that pass `f`; `None` if any is ambiguous.
fn apply<'a>(scene: &'a Scene, pool: Vec<&'a Obj>, category: &str, f: &Filter) -> Option<Vec<&'a Obj>> {
    match f {
        Filter::Scene(s) => (scene.kind == *s).then_some(pool),
        Filter::Viewer(v) => {
            let mut out = vec![];
            for o in pool {
                if sector(o)? == v {
                    out.push(o);
                }
            }
            Some(out)
        }
        Filter::Rel { answer, anchor, scene: sc } => {
            if sc.as_ref().is_some_and(|s| *s != scene.kind) || anchor == category {
                return None;
            }
            let anchors: Vec<&Obj> = scene.objects.iter().filter(|o| o.category == *anchor).collect();
            if anchors.len() != 1 {
                return None;
            }
            let mut out = vec![];
            for o in pool {
                if relation(o, anchors[0])? == *answer {
                    out.push(o);
                }
            }
            Some(out)
        }
    }
}

/// Splits an optional attribute word off a noun phrase.
fn noun_phrase(s: &str) -> Option<(Option<&str>, Option<&str>, String)> {
    let words: Vec<&str> = s.split(' ').collect();
    match words.as_slice() {
        [c] if CATEGORIES.contains(c) => Some((None, None, c.to_string())),
        [a, c] if CATEGORIES.contains(c) => {
            if COLORS.contains(a) {
                Some((Some(a), None, c.to_string()))
            } else {
                let m = MATERIALS.iter().find(|(adj, _)| adj == a)?.1;
                Some((None, Some(m), c.to_string()))
            }
        }
        _ => None,
    }
}

fn find_unique<'a>(scene: &'a Scene, np: &str) -> Option<&'a Obj> {
    let (color, material, cat) = noun_phrase(np)?;
    let hits: Vec<&Obj> = scene
        .objects
        .iter()
        .filter(|o| o.category == cat)
        .filter(|o| color.is_none_or(|c| o.color == c))
        .filter(|o| material.is_none_or(|m| o.material == m))
        .collect();
    (hits.len() == 1).then(|| hits[0])
}

fn of_category<'a>(scene: &'a Scene, cat: &str, color: Option<&str>) -> Vec<&'a Obj> {
    scene.objects.iter().filter(|o| o.category == cat && color.is_none_or(|c| o.color == c)).collect()
}

fn singular_of(plural: &str) -> Option<&'static str> {
    CATEGORIES.iter().copied().find(|c| format!("{c}s") == plural)
}

/// Ground-truth answer to `question` (natural text) about `scene_json`.
pub fn answer(scene_json: &Value, question: &str) -> Option<String> {
    let scene = load(scene_json);
    let q = question.strip_suffix('?')?;
    if q == "what room is depicted in the image" {
        return Some(scene.kind.clone());
    }
    if let Some(rest) = q.strip_prefix("is there a ") {
        let (cat, filt) = rest.split_once(' ')?;
        let found = apply(&scene, of_category(&scene, cat, None), cat, &parse_filter(filt)?)?;
        return Some(if found.is_empty() { "no" } else { "yes" }.to_string());
    }
    if let Some(rest) = q.strip_prefix("how many ") {
        let (plural, filt) = rest.split_once(" are ")?;
        let cat = singular_of(plural)?;
        let found = apply(&scene, of_category(&scene, cat, None), cat, &parse_filter(filt)?)?;
        return Some(found.len().to_string());
    }
    if let Some(rest) = q.strip_prefix("what is the color of the ") {
        let (cat, filt) = rest.split_once(' ')?;
        let found = apply(&scene, of_category(&scene, cat, None), cat, &parse_filter(filt)?)?;
        return (found.len() == 1).then(|| found[0].color.clone());
    }
    if let Some(rest) = q.strip_prefix("what is the ").and_then(|r| r.strip_suffix(" made of")) {
        let (color, rest) = match rest.split_once(' ') {
            Some((c, r)) if COLORS.contains(&c) => (Some(c), r),
            _ => (None, rest),
        };
        let (cat, filt) = rest.split_once(' ')?;
        let found = apply(&scene, of_category(&scene, cat, color), cat, &parse_filter(filt)?)?;
        return (found.len() == 1).then(|| found[0].material.clone());
    }
    if let Some(np) = q.strip_prefix("where can i find the ") {
        return sector(find_unique(&scene, np)?).map(str::to_string);
    }
    if let Some(rest) = q.strip_prefix("which side of the ") {
        let (anchor_np, target_np) = rest.split_once(" is the ")?;
        let anchor = find_unique(&scene, anchor_np)?;
        let target = find_unique(&scene, target_np)?;
        if anchor.id == target.id {
            return None;
        }
        return relation(target, anchor).map(str::to_string);
    }
    None
}
