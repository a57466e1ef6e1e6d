//! Question grammar: a typed form of every template, its rendering to tokens,
//! the inverse parser, and evaluation against a scene annotation.

use crate::error::{Error, Result};
use crate::synth::{
    relation_margin, relative_position, viewer_direction_label, viewer_label_margin, Category, Color,
    Material, ObjectSpec, Relation, SceneSpec, SceneType, ViewerDirection, AMBIGUITY_MARGIN,
};

use super::QType;

/// Spatial qualifier appended to exist/counting/property questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Qualifier {
    InScene(SceneType),
    Viewer(ViewerDirection),
    Relative { relation: Relation, anchor: Category, scene: Option<SceneType> },
}

/// An object description with an optional attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Referent {
    pub category: Category,
    pub attribute: Option<Attribute>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attribute {
    Color(Color),
    Material(Material),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Question {
    Scene,
    Exist { category: Category, qualifier: Qualifier },
    Counting { category: Category, qualifier: Qualifier },
    Color { category: Category, qualifier: Qualifier },
    Material { category: Category, color: Option<Color>, qualifier: Qualifier },
    Where { target: Referent },
    Side { anchor: Referent, target: Referent },
}

/// An evaluated answer plus the object it is about, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub answer: String,
    pub focus: Option<ObjectSpec>,
}

impl Qualifier {
    fn text(&self) -> String {
        match self {
            Qualifier::InScene(s) => format!("in the {s}"),
            Qualifier::Viewer(d) => d.phrase().to_string(),
            Qualifier::Relative { relation, anchor, scene } => {
                let mut t = format!("{} the {anchor}", relation.qualifier());
                if let Some(s) = scene {
                    t.push_str(&format!(" in the {s}"));
                }
                t
            }
        }
    }
}

impl Referent {
    fn text(&self) -> String {
        match self.attribute {
            None => self.category.to_string(),
            Some(Attribute::Color(c)) => format!("{c} {}", self.category),
            Some(Attribute::Material(m)) => format!("{} {}", m.adjective(), self.category),
        }
    }

    pub fn matches(&self, o: &ObjectSpec) -> bool {
        o.category == self.category
            && match self.attribute {
                None => true,
                Some(Attribute::Color(c)) => o.color == c,
                Some(Attribute::Material(m)) => o.material == m,
            }
    }
}

impl Question {
    pub fn qtype(&self) -> QType {
        match self {
            Question::Scene => QType::Scene,
            Question::Exist { .. } => QType::Exist,
            Question::Counting { .. } => QType::Counting,
            Question::Color { .. } | Question::Material { .. } => QType::Property,
            Question::Where { .. } | Question::Side { .. } => QType::Spatial,
        }
    }

    pub fn text(&self) -> String {
        match self {
            Question::Scene => "what room is depicted in the image?".to_string(),
            Question::Exist { category, qualifier } => format!("is there a {category} {}?", qualifier.text()),
            Question::Counting { category, qualifier } => {
                format!("how many {} are {}?", category.plural(), qualifier.text())
            }
            Question::Color { category, qualifier } => {
                format!("what is the color of the {category} {}?", qualifier.text())
            }
            Question::Material { category, color, qualifier } => {
                let head = match color {
                    Some(c) => format!("{c} {category}"),
                    None => category.to_string(),
                };
                format!("what is the {head} {} made of?", qualifier.text())
            }
            Question::Where { target } => format!("where can i find the {}?", target.text()),
            Question::Side { anchor, target } => {
                format!("which side of the {} is the {}?", anchor.text(), target.text())
            }
        }
    }

    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.text())
    }
}

/// Lowercases and splits on whitespace; `?` becomes its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase().replace('?', " ?").split_whitespace().map(str::to_string).collect()
}

struct Cursor<'a> {
    toks: &'a [String],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self, n: usize) -> Option<&'a str> {
        self.toks.get(self.pos + n).map(String::as_str)
    }

    fn try_words(&mut self, words: &str) -> bool {
        let ws: Vec<&str> = words.split(' ').collect();
        if ws.iter().enumerate().all(|(i, w)| self.peek(i) == Some(*w)) {
            self.pos += ws.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, words: &str) -> Result<()> {
        if self.try_words(words) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{words}`")))
        }
    }

    fn error(&self, what: &str) -> Error {
        Error::Parse(format!("{what} at token {} of `{}`", self.pos, self.toks.join(" ")))
    }

    fn finish(&mut self) -> Result<()> {
        self.expect("?")?;
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(self.error("trailing tokens"))
        }
    }

    fn category(&mut self) -> Result<Category> {
        let c = self.peek(0).and_then(Category::from_name).ok_or_else(|| self.error("expected an object"))?;
        self.pos += 1;
        Ok(c)
    }

    fn plural(&mut self) -> Result<Category> {
        let c = self.peek(0).and_then(Category::from_plural).ok_or_else(|| self.error("expected plural object"))?;
        self.pos += 1;
        Ok(c)
    }

    fn color(&mut self) -> Option<Color> {
        let c = self.peek(0).and_then(Color::from_name)?;
        self.pos += 1;
        Some(c)
    }

    fn scene(&mut self) -> Result<SceneType> {
        for s in SceneType::ALL {
            if self.try_words(s.name()) {
                return Ok(*s);
            }
        }
        Err(self.error("expected a scene type"))
    }

    fn referent(&mut self) -> Result<Referent> {
        let attribute = if let Some(c) = self.color() {
            Some(Attribute::Color(c))
        } else if let Some(m) = self.peek(0).and_then(Material::from_adjective) {
            self.pos += 1;
            Some(Attribute::Material(m))
        } else {
            None
        };
        Ok(Referent { category: self.category()?, attribute })
    }

    fn qualifier(&mut self) -> Result<Qualifier> {
        for d in ViewerDirection::ALL {
            if self.try_words(d.phrase()) {
                return Ok(Qualifier::Viewer(d));
            }
        }
        if self.try_words("in the") {
            return Ok(Qualifier::InScene(self.scene()?));
        }
        for relation in Relation::ALL {
            if self.try_words(&format!("{} the", relation.qualifier())) {
                let anchor = self.category()?;
                let scene = if self.try_words("in the") { Some(self.scene()?) } else { None };
                return Ok(Qualifier::Relative { relation, anchor, scene });
            }
        }
        Err(self.error("expected a spatial qualifier"))
    }
}

/// Parses a tokenized question back into its template.
pub fn parse_question(tokens: &[String]) -> Result<Question> {
    let mut c = Cursor { toks: tokens, pos: 0 };
    let q = if c.try_words("what room is depicted in the image") {
        Question::Scene
    } else if c.try_words("is there a") {
        let category = c.category()?;
        Question::Exist { category, qualifier: c.qualifier()? }
    } else if c.try_words("how many") {
        let category = c.plural()?;
        c.expect("are")?;
        Question::Counting { category, qualifier: c.qualifier()? }
    } else if c.try_words("what is the color of the") {
        let category = c.category()?;
        Question::Color { category, qualifier: c.qualifier()? }
    } else if c.try_words("what is the") {
        let color = c.color();
        let category = c.category()?;
        let qualifier = c.qualifier()?;
        c.expect("made of")?;
        Question::Material { category, color, qualifier }
    } else if c.try_words("where can i find the") {
        Question::Where { target: c.referent()? }
    } else if c.try_words("which side of the") {
        let anchor = c.referent()?;
        c.expect("is the")?;
        Question::Side { anchor, target: c.referent()? }
    } else {
        return Err(c.error("unknown question template"));
    };
    c.finish()?;
    Ok(q)
}

fn ambiguous(detail: impl Into<String>) -> Error {
    Error::Ambiguity(detail.into())
}

fn unique<'a>(spec: &'a SceneSpec, pred: impl Fn(&ObjectSpec) -> bool, what: &str) -> Result<&'a ObjectSpec> {
    let mut it = spec.objects.iter().filter(|o| pred(o));
    match (it.next(), it.next()) {
        (Some(o), None) => Ok(o),
        (None, _) => Err(ambiguous(format!("no {what} in the scene"))),
        _ => Err(ambiguous(format!("{what} is not unique"))),
    }
}

/// Objects of `category` satisfying `q`, after checking that the qualifier is
/// well posed: the scene named is the true scene, a relative anchor is unique
/// and of another category, and no candidate sits within the ambiguity margin
/// of a decision boundary.
fn qualified<'a>(
    spec: &'a SceneSpec,
    category: Category,
    color: Option<Color>,
    q: &Qualifier,
) -> Result<Vec<&'a ObjectSpec>> {
    let candidates = spec.objects.iter().filter(|o| o.category == category && color.is_none_or(|c| o.color == c));
    let check_scene = |s: &SceneType| {
        if *s == spec.scene_type {
            Ok(())
        } else {
            Err(ambiguous(format!("scene qualifier {s} does not match {}", spec.scene_type)))
        }
    };
    match q {
        Qualifier::InScene(s) => {
            check_scene(s)?;
            Ok(candidates.collect())
        }
        Qualifier::Viewer(d) => {
            let mut out = Vec::new();
            for o in candidates {
                if viewer_label_margin(o.center) < AMBIGUITY_MARGIN {
                    return Err(ambiguous(format!("object {} is near a viewer sector boundary", o.id)));
                }
                if viewer_direction_label(o.center) == *d {
                    out.push(o);
                }
            }
            Ok(out)
        }
        Qualifier::Relative { relation, anchor, scene } => {
            if let Some(s) = scene {
                check_scene(s)?;
            }
            if *anchor == category {
                return Err(ambiguous("object qualified relative to its own category"));
            }
            let a = unique(spec, |o| o.category == *anchor, anchor.name())?;
            let mut out = Vec::new();
            for o in candidates {
                if relation_margin(o, a) < AMBIGUITY_MARGIN {
                    return Err(ambiguous(format!("objects {} and {} are near a tie", o.id, a.id)));
                }
                if relative_position(o, a)? == *relation {
                    out.push(o);
                }
            }
            Ok(out)
        }
    }
}

fn anchor_of<'a>(spec: &'a SceneSpec, q: &Qualifier) -> Option<&'a ObjectSpec> {
    match q {
        Qualifier::Relative { anchor, .. } => spec.objects.iter().find(|o| o.category == *anchor),
        _ => None,
    }
}

fn single<'a>(found: Vec<&'a ObjectSpec>, what: &str) -> Result<&'a ObjectSpec> {
    match found.as_slice() {
        [o] => Ok(o),
        [] => Err(ambiguous(format!("no {what} satisfies the qualifier"))),
        _ => Err(ambiguous(format!("{what} is not unique under the qualifier"))),
    }
}

/// Answers `q` from the annotation, or reports why it is not well posed.
pub fn evaluate_question(q: &Question, spec: &SceneSpec) -> Result<Evaluation> {
    let eval = |answer: String, focus: Option<&ObjectSpec>| Evaluation { answer, focus: focus.cloned() };
    match q {
        Question::Scene => Ok(eval(spec.scene_type.to_string(), None)),
        Question::Exist { category, qualifier } => {
            let found = qualified(spec, *category, None, qualifier)?;
            let answer = if found.is_empty() { "no" } else { "yes" };
            Ok(eval(answer.into(), found.first().copied().or_else(|| anchor_of(spec, qualifier))))
        }
        Question::Counting { category, qualifier } => {
            let found = qualified(spec, *category, None, qualifier)?;
            Ok(eval(found.len().to_string(), found.first().copied().or_else(|| anchor_of(spec, qualifier))))
        }
        Question::Color { category, qualifier } => {
            let o = single(qualified(spec, *category, None, qualifier)?, category.name())?;
            Ok(eval(o.color.to_string(), Some(o)))
        }
        Question::Material { category, color, qualifier } => {
            let o = single(qualified(spec, *category, *color, qualifier)?, category.name())?;
            Ok(eval(o.material.to_string(), Some(o)))
        }
        Question::Where { target } => {
            let o = unique(spec, |o| target.matches(o), &target.text())?;
            if viewer_label_margin(o.center) < AMBIGUITY_MARGIN {
                return Err(ambiguous(format!("object {} is near a viewer sector boundary", o.id)));
            }
            Ok(eval(viewer_direction_label(o.center).phrase().into(), Some(o)))
        }
        Question::Side { anchor, target } => {
            let a = unique(spec, |o| anchor.matches(o), &anchor.text())?;
            let t = unique(spec, |o| target.matches(o), &target.text())?;
            if a.id == t.id {
                return Err(ambiguous("both referents name the same object"));
            }
            if relation_margin(t, a) < AMBIGUITY_MARGIN {
                return Err(ambiguous(format!("objects {} and {} are near a tie", t.id, a.id)));
            }
            Ok(eval(relative_position(t, a)?.answer().into(), Some(t)))
        }
    }
}

/// Every question the templates can express about `spec`'s vocabulary of
/// objects, well posed or not, grouped by type.
pub fn enumerate_questions(spec: &SceneSpec) -> Vec<Question> {
    let scene = spec.scene_type;
    let mut anchors: Vec<Category> = spec.objects.iter().map(|o| o.category).collect();
    anchors.sort();
    anchors.dedup();
    let mut qualifiers = vec![Qualifier::InScene(scene)];
    qualifiers.extend(ViewerDirection::ALL.iter().map(|d| Qualifier::Viewer(*d)));
    for &anchor in &anchors {
        for &relation in &Relation::ALL {
            for s in [None, Some(scene)] {
                qualifiers.push(Qualifier::Relative { relation, anchor, scene: s });
            }
        }
    }

    let mut out = vec![Question::Scene];
    for &category in Category::ALL {
        for &qualifier in &qualifiers {
            out.push(Question::Exist { category, qualifier });
            out.push(Question::Counting { category, qualifier });
        }
    }
    let mut referents = Vec::new();
    for o in &spec.objects {
        for &qualifier in &qualifiers {
            out.push(Question::Color { category: o.category, qualifier });
            out.push(Question::Material { category: o.category, color: None, qualifier });
            out.push(Question::Material { category: o.category, color: Some(o.color), qualifier });
        }
        referents.push(Referent { category: o.category, attribute: None });
        referents.push(Referent { category: o.category, attribute: Some(Attribute::Color(o.color)) });
        referents.push(Referent { category: o.category, attribute: Some(Attribute::Material(o.material)) });
    }
    for &target in &referents {
        out.push(Question::Where { target });
        for &anchor in &referents {
            if anchor.category != target.category || anchor.attribute != target.attribute {
                out.push(Question::Side { anchor, target });
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|q| seen.insert(*q));
    out
}
