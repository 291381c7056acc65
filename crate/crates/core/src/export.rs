//! Fabrication layouts: SVG (mm units) and a minimal ASCII DXF (R12).
//!
//! Layout, top to bottom: the reference row, a 2 mm gap, then the input row.
//! Each row is `max(h, F)` tall with its footprint at x = 0 and the trace
//! segments starting at `F + 2`. The slider board sits 2 mm after the longest
//! row and spans both rows.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::{SequencePattern, Trace};

pub const ROW_GAP_MM: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Layer {
    Reference,
    Input,
    Footprint,
    Slider,
}

impl Layer {
    pub const ALL: [Layer; 4] = [
        Layer::Reference,
        Layer::Input,
        Layer::Footprint,
        Layer::Slider,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Layer::Reference => "REFERENCE",
            Layer::Input => "INPUT",
            Layer::Footprint => "FOOTPRINT",
            Layer::Slider => "SLIDER",
        }
    }

    pub fn from_name(s: &str) -> Option<Layer> {
        Layer::ALL.into_iter().find(|l| l.name() == s)
    }

    fn color(self) -> (&'static str, u8) {
        match self {
            Layer::Reference => ("#000000", 7),
            Layer::Input => ("#d62728", 1),
            Layer::Footprint => ("#7f7f7f", 8),
            Layer::Slider => ("#2ca02c", 3),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub layer: Layer,
    pub x_mm: f64,
    pub y_mm: f64,
    pub width_mm: f64,
    pub height_mm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutDocument {
    pub width_mm: f64,
    pub height_mm: f64,
    pub rects: Vec<Rect>,
    /// Pattern the layout was drawn from; embedded in SVG output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SequencePattern>,
}

impl LayoutDocument {
    pub fn layer(&self, layer: Layer) -> impl Iterator<Item = &Rect> + '_ {
        self.rects.iter().filter(move |r| r.layer == layer)
    }
}

/// x coordinate of pattern position 0.
pub fn pattern_origin_mm(pattern: &SequencePattern) -> f64 {
    pattern.geometry().footprint_side_mm + ROW_GAP_MM
}

pub fn layout(pattern: &SequencePattern) -> LayoutDocument {
    let g = pattern.geometry();
    let row_h = g.electrode_height_mm.max(g.footprint_side_mm);
    let x0 = pattern_origin_mm(pattern);
    let mut rects = Vec::new();
    for (row, trace, layer) in [
        (0.0, Trace::Reference, Layer::Reference),
        (1.0, Trace::Input, Layer::Input),
    ] {
        let y = row * (row_h + ROW_GAP_MM);
        rects.push(Rect {
            layer: Layer::Footprint,
            x_mm: 0.0,
            y_mm: y + (row_h - g.footprint_side_mm) / 2.0,
            width_mm: g.footprint_side_mm,
            height_mm: g.footprint_side_mm,
        });
        for seg in pattern.segments(trace) {
            rects.push(Rect {
                layer,
                x_mm: x0 + seg.start_mm,
                y_mm: y + (row_h - g.electrode_height_mm) / 2.0,
                width_mm: seg.length_mm,
                height_mm: g.electrode_height_mm,
            });
        }
    }
    let height = 2.0 * row_h + ROW_GAP_MM;
    let slider_x = x0 + pattern.total_travel_mm() + ROW_GAP_MM;
    rects.push(Rect {
        layer: Layer::Slider,
        x_mm: slider_x,
        y_mm: 0.0,
        width_mm: g.slider_width_mm,
        height_mm: height,
    });
    rects.sort_by_key(|r| r.layer);
    LayoutDocument {
        width_mm: slider_x + g.slider_width_mm,
        height_mm: height,
        rects,
        source: Some(pattern.clone()),
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

const SVG_NS: &str = "http://www.w3.org/2000/svg";
const PATTERN_DESC_ID: &str = "duotouch-pattern";

pub fn to_svg(doc: &LayoutDocument) -> String {
    let mut s = String::new();
    let (w, h) = (doc.width_mm, doc.height_mm);
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        s,
        r#"<svg xmlns="{SVG_NS}" width="{w}mm" height="{h}mm" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    if let Some(p) = &doc.source {
        let json = serde_json::to_string(p).expect("pattern serializes");
        writeln!(
            s,
            r#"  <desc id="{PATTERN_DESC_ID}">{}</desc>"#,
            xml_escape(&json)
        )
        .unwrap();
    }
    for layer in Layer::ALL {
        let (fill, _) = layer.color();
        writeln!(s, r#"  <g id="{}" fill="{fill}">"#, layer.name()).unwrap();
        for r in doc.layer(layer) {
            writeln!(
                s,
                r#"    <rect x="{}" y="{}" width="{}" height="{}"/>"#,
                r.x_mm, r.y_mm, r.width_mm, r.height_mm
            )
            .unwrap();
        }
        writeln!(s, "  </g>").unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedExport(msg.into())
}

fn num_attr(node: roxmltree::Node, name: &str) -> Result<f64> {
    let raw = node
        .attribute(name)
        .ok_or_else(|| malformed(format!("<{}> lacks {name}", node.tag_name().name())))?;
    let raw = raw.strip_suffix("mm").unwrap_or(raw);
    raw.parse()
        .map_err(|_| malformed(format!("{name}={raw:?} is not a number")))
}

/// Reads back an SVG written by [`to_svg`]. When the file embeds its source
/// pattern, the drawn rectangles must be exactly the pattern's layout.
pub fn parse_svg(text: &str) -> Result<LayoutDocument> {
    let xml = roxmltree::Document::parse(text).map_err(|e| malformed(e.to_string()))?;
    let root = xml.root_element();
    if root.tag_name().name() != "svg" || root.tag_name().namespace() != Some(SVG_NS) {
        return Err(malformed("root element is not svg"));
    }
    for dim in ["width", "height"] {
        if !root.attribute(dim).is_some_and(|v| v.ends_with("mm")) {
            return Err(malformed(format!("svg {dim} must be given in mm")));
        }
    }
    let width_mm = num_attr(root, "width")?;
    let height_mm = num_attr(root, "height")?;
    let view: Vec<f64> = root
        .attribute("viewBox")
        .unwrap_or_default()
        .split_whitespace()
        .map(|v| v.parse().map_err(|_| malformed("bad viewBox")))
        .collect::<Result<_>>()?;
    if view != [0.0, 0.0, width_mm, height_mm] {
        return Err(malformed("viewBox does not match the mm size"));
    }
    let mut rects = Vec::new();
    for g in root.children().filter(|n| n.has_tag_name((SVG_NS, "g"))) {
        let id = g.attribute("id").unwrap_or_default();
        let layer =
            Layer::from_name(id).ok_or_else(|| malformed(format!("unknown layer {id:?}")))?;
        for r in g.children().filter(|n| n.has_tag_name((SVG_NS, "rect"))) {
            rects.push(Rect {
                layer,
                x_mm: num_attr(r, "x")?,
                y_mm: num_attr(r, "y")?,
                width_mm: num_attr(r, "width")?,
                height_mm: num_attr(r, "height")?,
            });
        }
    }
    let source = match root
        .children()
        .find(|n| n.has_tag_name((SVG_NS, "desc")) && n.attribute("id") == Some(PATTERN_DESC_ID))
    {
        Some(desc) => {
            let pattern: SequencePattern = serde_json::from_str(desc.text().unwrap_or_default())
                .map_err(|e| malformed(format!("embedded pattern: {e}")))?;
            Some(pattern)
        }
        None => None,
    };
    let doc = LayoutDocument {
        width_mm,
        height_mm,
        rects,
        source,
    };
    if let Some(p) = &doc.source {
        if layout(p) != doc {
            return Err(malformed("drawing does not match the embedded pattern"));
        }
    }
    Ok(doc)
}

/// SVG → pattern.
pub fn pattern_from_svg(text: &str) -> Result<SequencePattern> {
    parse_svg(text)?
        .source
        .ok_or_else(|| malformed("svg carries no pattern"))
}

fn pair(out: &mut String, code: i32, value: impl std::fmt::Display) {
    writeln!(out, "{code}\n{value}").unwrap();
}

/// ASCII DXF with one closed polyline per rectangle, y pointing up.
pub fn to_dxf(doc: &LayoutDocument) -> String {
    let mut s = String::new();
    pair(&mut s, 0, "SECTION");
    pair(&mut s, 2, "HEADER");
    pair(&mut s, 9, "$ACADVER");
    pair(&mut s, 1, "AC1009");
    pair(&mut s, 9, "$INSUNITS");
    pair(&mut s, 70, 4);
    pair(&mut s, 9, "$MEASUREMENT");
    pair(&mut s, 70, 1);
    pair(&mut s, 0, "ENDSEC");

    pair(&mut s, 0, "SECTION");
    pair(&mut s, 2, "TABLES");
    pair(&mut s, 0, "TABLE");
    pair(&mut s, 2, "LAYER");
    pair(&mut s, 70, Layer::ALL.len());
    for layer in Layer::ALL {
        pair(&mut s, 0, "LAYER");
        pair(&mut s, 2, layer.name());
        pair(&mut s, 70, 0);
        pair(&mut s, 62, layer.color().1);
        pair(&mut s, 6, "CONTINUOUS");
    }
    pair(&mut s, 0, "ENDTAB");
    pair(&mut s, 0, "ENDSEC");

    pair(&mut s, 0, "SECTION");
    pair(&mut s, 2, "ENTITIES");
    for r in &doc.rects {
        let name = r.layer.name();
        let (x0, x1) = (r.x_mm, r.x_mm + r.width_mm);
        let (y0, y1) = (doc.height_mm - r.y_mm - r.height_mm, doc.height_mm - r.y_mm);
        pair(&mut s, 0, "POLYLINE");
        pair(&mut s, 8, name);
        pair(&mut s, 66, 1);
        pair(&mut s, 70, 1);
        for (x, y) in [(x0, y0), (x1, y0), (x1, y1), (x0, y1)] {
            pair(&mut s, 0, "VERTEX");
            pair(&mut s, 8, name);
            pair(&mut s, 10, x);
            pair(&mut s, 20, y);
        }
        pair(&mut s, 0, "SEQEND");
        pair(&mut s, 8, name);
    }
    pair(&mut s, 0, "ENDSEC");
    pair(&mut s, 0, "EOF");
    s
}

/// Axis-aligned box of a DXF polyline in drawing coordinates (y up).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DxfBox {
    pub layer: Layer,
    pub min: (f64, f64),
    pub max: (f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DxfSummary {
    pub insunits: i32,
    pub layers: Vec<Layer>,
    pub boxes: Vec<DxfBox>,
}

struct Pairs<'a> {
    items: Vec<(i32, &'a str)>,
    pos: usize,
}

impl<'a> Pairs<'a> {
    fn new(text: &'a str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().map(str::trim).collect();
        if !lines.len().is_multiple_of(2) {
            return Err(malformed("odd number of DXF lines"));
        }
        let items = lines
            .chunks(2)
            .map(|c| {
                c[0].parse()
                    .map(|code| (code, c[1]))
                    .map_err(|_| malformed(format!("bad group code {:?}", c[0])))
            })
            .collect::<Result<_>>()?;
        Ok(Pairs { items, pos: 0 })
    }

    fn next(&mut self) -> Result<(i32, &'a str)> {
        let p = self
            .items
            .get(self.pos)
            .copied()
            .ok_or_else(|| malformed("unexpected end of DXF"))?;
        self.pos += 1;
        Ok(p)
    }

    fn peek(&self) -> Option<(i32, &'a str)> {
        self.items.get(self.pos).copied()
    }

    fn expect(&mut self, code: i32, value: &str) -> Result<()> {
        let got = self.next()?;
        if got != (code, value) {
            return Err(malformed(format!(
                "expected {code}/{value}, found {}/{}",
                got.0, got.1
            )));
        }
        Ok(())
    }

    /// Group values up to the next code-0 pair.
    fn fields(&mut self) -> Vec<(i32, &'a str)> {
        let mut out = Vec::new();
        while let Some(p) = self.peek().filter(|p| p.0 != 0) {
            out.push(p);
            self.pos += 1;
        }
        out
    }
}

fn field<'a>(fields: &[(i32, &'a str)], code: i32) -> Result<&'a str> {
    fields
        .iter()
        .find(|f| f.0 == code)
        .map(|f| f.1)
        .ok_or_else(|| malformed(format!("missing group {code}")))
}

fn num(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| malformed(format!("{s:?} is not a number")))
}

/// Structural check of a DXF written by [`to_dxf`]: mm units, declared
/// layers, closed four-vertex polylines on declared layers.
pub fn validate_dxf(text: &str) -> Result<DxfSummary> {
    let mut p = Pairs::new(text)?;
    p.expect(0, "SECTION")?;
    p.expect(2, "HEADER")?;
    let header = p.fields();
    let mut insunits = None;
    for w in header.windows(2) {
        if w[0] == (9, "$INSUNITS") && w[1].0 == 70 {
            insunits = w[1].1.parse::<i32>().ok();
        }
    }
    let insunits = insunits.ok_or_else(|| malformed("missing $INSUNITS"))?;
    if insunits != 4 {
        return Err(malformed(format!(
            "$INSUNITS {insunits} is not millimetres"
        )));
    }
    p.expect(0, "ENDSEC")?;

    p.expect(0, "SECTION")?;
    p.expect(2, "TABLES")?;
    p.expect(0, "TABLE")?;
    p.expect(2, "LAYER")?;
    p.fields();
    let mut layers = Vec::new();
    while p.peek() == Some((0, "LAYER")) {
        p.next()?;
        let name = field(&p.fields(), 2)?;
        layers.push(
            Layer::from_name(name).ok_or_else(|| malformed(format!("unknown layer {name:?}")))?,
        );
    }
    p.expect(0, "ENDTAB")?;
    p.expect(0, "ENDSEC")?;

    p.expect(0, "SECTION")?;
    p.expect(2, "ENTITIES")?;
    let mut boxes = Vec::new();
    while p.peek() == Some((0, "POLYLINE")) {
        p.next()?;
        let head = p.fields();
        let layer_name = field(&head, 8)?;
        let layer = Layer::from_name(layer_name)
            .filter(|l| layers.contains(l))
            .ok_or_else(|| malformed(format!("polyline on undeclared layer {layer_name:?}")))?;
        if field(&head, 70)?.parse::<i32>().map(|f| f & 1) != Ok(1) {
            return Err(malformed("polyline is not closed"));
        }
        let mut pts = Vec::new();
        while p.peek() == Some((0, "VERTEX")) {
            p.next()?;
            let f = p.fields();
            pts.push((num(field(&f, 10)?)?, num(field(&f, 20)?)?));
        }
        p.expect(0, "SEQEND")?;
        p.fields();
        if pts.len() != 4 {
            return Err(malformed(format!("polyline has {} vertices", pts.len())));
        }
        let xs = pts.iter().map(|q| q.0);
        let ys = pts.iter().map(|q| q.1);
        boxes.push(DxfBox {
            layer,
            min: (
                xs.clone().fold(f64::INFINITY, f64::min),
                ys.clone().fold(f64::INFINITY, f64::min),
            ),
            max: (
                xs.fold(f64::NEG_INFINITY, f64::max),
                ys.fold(f64::NEG_INFINITY, f64::max),
            ),
        });
    }
    p.expect(0, "ENDSEC")?;
    p.expect(0, "EOF")?;
    if p.peek().is_some() {
        return Err(malformed("content after EOF"));
    }
    Ok(DxfSummary {
        insunits,
        layers,
        boxes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{Configuration, GeometrySpec};

    fn pattern() -> SequencePattern {
        let config = Configuration::Aligned {
            code: "100011".parse().unwrap(),
        };
        SequencePattern::build(&config, &GeometrySpec::with_width(3.0)).unwrap()
    }

    #[test]
    fn layout_dimensions() {
        let doc = layout(&pattern());
        assert_eq!(doc.layer(Layer::Reference).count(), 6);
        assert_eq!(doc.layer(Layer::Input).count(), 2);
        assert_eq!(doc.layer(Layer::Footprint).count(), 2);
        assert_eq!(doc.layer(Layer::Slider).count(), 1);
        assert_eq!(doc.height_mm, 18.0);
        // origin 10, travel 63, gap 2, slider 3
        assert_eq!(doc.width_mm, 78.0);
        let input: Vec<_> = doc
            .layer(Layer::Input)
            .map(|r| (r.x_mm, r.width_mm))
            .collect();
        assert_eq!(input, vec![(10.0, 3.0), (58.0, 15.0)]);
    }

    #[test]
    fn svg_round_trip() {
        let doc = layout(&pattern());
        let svg = to_svg(&doc);
        assert_eq!(parse_svg(&svg).unwrap(), doc);
        assert_eq!(pattern_from_svg(&svg).unwrap(), pattern());
        assert!(parse_svg(&svg.replace(r#"width="15""#, r#"width="16""#)).is_err());
        let bare = LayoutDocument {
            source: None,
            ..doc.clone()
        };
        assert_eq!(parse_svg(&to_svg(&bare)).unwrap(), bare);
        assert!(pattern_from_svg(&to_svg(&bare)).is_err());
        assert!(parse_svg("<svg/>").is_err());
        assert!(parse_svg(&svg.replace("mm\"", "px\"")).is_err());
    }

    #[test]
    fn dxf_structure() {
        let doc = layout(&pattern());
        let summary = validate_dxf(&to_dxf(&doc)).unwrap();
        assert_eq!(summary.insunits, 4);
        assert_eq!(summary.layers, Layer::ALL.to_vec());
        assert_eq!(summary.boxes.len(), doc.rects.len());
        for (b, r) in summary.boxes.iter().zip(&doc.rects) {
            assert_eq!(b.layer, r.layer);
            assert!((b.max.0 - b.min.0 - r.width_mm).abs() < 1e-9);
            assert!((b.max.1 - b.min.1 - r.height_mm).abs() < 1e-9);
            assert!((doc.height_mm - b.max.1 - r.y_mm).abs() < 1e-9);
        }
    }

    #[test]
    fn dxf_rejects_damage() {
        let dxf = to_dxf(&layout(&pattern()));
        assert!(validate_dxf(&dxf.replace("$INSUNITS\n70\n4", "$INSUNITS\n70\n1")).is_err());
        assert!(validate_dxf(&dxf.replacen("8\nINPUT", "8\nCOPPER", 1)).is_err());
        assert!(validate_dxf(dxf.trim_end_matches("0\nEOF\n")).is_err());
        assert!(validate_dxf("").is_err());
    }
}
