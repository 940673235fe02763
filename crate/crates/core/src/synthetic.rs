//! A small, fully scripted movie world used by the examples and the
//! end-to-end tests.
//!
//! About 200 facts over 42 movies, about 40 of them with qualifiers (cast
//! with character roles, series membership with successor and ordinal), and
//! 20 five-intent conversations with two or three phrasings per intent.

use crate::dataset::{ConversationScript, Dataset, GoldAnswer, IntentScript};
use crate::error::Result;
use crate::kg::{EntityRef, KgIndex, NaryFact, Predicate};

const ADJECTIVES: [&str; 8] = ["Silent", "Crimson", "Hollow", "Golden", "Frozen", "Distant", "Broken", "Velvet"];
const NOUNS: [&str; 5] = ["Harbor", "Meadow", "Lantern", "Canyon", "Orchard"];
const DIRECTORS: [&str; 12] = [
    "Ada Whitlock",
    "Boris Kellan",
    "Celia Marsh",
    "Dorian Pike",
    "Edith Varga",
    "Felix Norrell",
    "Greta Holm",
    "Hugo Stanton",
    "Iris Calloway",
    "Jonas Brandt",
    "Katya Orlova",
    "Lionel Drake",
];
const COMPOSERS: [&str; 8] = [
    "Mira Sollen",
    "Otto Ferris",
    "Priya Anand",
    "Quentin Rowe",
    "Rosa Delmar",
    "Stellan Voss",
    "Tamsin Grey",
    "Ulric Bauer",
];
const ACTOR_FIRST: [&str; 10] = ["Nina", "Owen", "Paula", "Rafe", "Sara", "Theo", "Uma", "Victor", "Wren", "Yara"];
const ACTOR_LAST: [&str; 3] = ["Cole", "Park", "Quinn"];
const CHAR_FIRST: [&str; 10] = ["Mara", "Tobin", "Elsk", "Joren", "Pell", "Vika", "Corin", "Desh", "Lio", "Brisa"];
const CHAR_LAST: [&str; 3] = ["Quill", "Varro", "Sand"];
const GENRES: [&str; 8] = [
    "psychological drama",
    "heist thriller",
    "romantic comedy",
    "space western",
    "gothic horror",
    "jukebox musical",
    "war epic",
    "cozy mystery",
];
const SERIES: [&str; 6] = [
    "Ember Chronicles",
    "Tidewater Cycle",
    "Northstar Trilogy",
    "Glass Meridian Saga",
    "Hollow Crown Quartet",
    "Driftwood Tales",
];

pub const MOVIES: usize = ADJECTIVES.len() * NOUNS.len();
const CAST_MOVIES: usize = 30;
const SERIES_LEN: usize = 3;

fn slug(label: &str) -> String {
    label
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

fn entity(prefix: &str, label: &str) -> EntityRef {
    EntityRef::new(format!("{prefix}:{}", slug(label)), label)
}

fn year(value: u32) -> EntityRef {
    EntityRef::new(format!("lit:{value}"), value.to_string())
}

fn director() -> Predicate {
    Predicate::new("P57", "director")
}
fn publication_date() -> Predicate {
    Predicate::new("P577", "publication date")
}
fn genre() -> Predicate {
    Predicate::new("P136", "genre")
}
fn composer() -> Predicate {
    Predicate::new("P86", "composer")
}
fn cast_member() -> Predicate {
    Predicate::new("P161", "cast member")
}
fn character_role() -> Predicate {
    Predicate::new("P453", "character role")
}
fn part_of_series() -> Predicate {
    Predicate::new("P179", "part of the series")
}
fn followed_by() -> Predicate {
    Predicate::new("P156", "followed by")
}
fn series_ordinal() -> Predicate {
    Predicate::new("P1545", "series ordinal")
}
fn after_work_by() -> Predicate {
    Predicate::new("P1877", "after a work by")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Ask {
    Director,
    Year,
    Genre,
    Composer,
    Cast,
    Next,
    Ordinal,
}

struct Movie {
    entity: EntityRef,
    director: EntityRef,
    year: EntityRef,
    genre: EntityRef,
    composer: EntityRef,
    cast: Option<(EntityRef, EntityRef)>,
    next: Option<EntityRef>,
    ordinal: Option<EntityRef>,
}

impl Movie {
    fn gold(&self, ask: Ask) -> Option<&EntityRef> {
        match ask {
            Ask::Director => Some(&self.director),
            Ask::Year => Some(&self.year),
            Ask::Genre => Some(&self.genre),
            Ask::Composer => Some(&self.composer),
            Ask::Cast => self.cast.as_ref().map(|(actor, _)| actor),
            Ask::Next => self.next.as_ref(),
            Ask::Ordinal => self.ordinal.as_ref(),
        }
    }
}

/// Three phrasings; `t` is the movie reference ("it" or a title).
fn phrasings(ask: Ask, t: &str, titled: bool, character: &str) -> [String; 3] {
    match (ask, titled) {
        (Ask::Director, true) => [format!("Who directed {t}?"), format!("Who was the director of {t}?"), format!("Name the filmmaker behind {t}.")],
        (Ask::Director, false) => ["Who directed it?".into(), "Who was the director?".into(), "And the filmmaker behind it?".into()],
        (Ask::Year, true) => [format!("When was {t} released?"), format!("In which year did {t} come out?"), format!("Release date of {t}?")],
        (Ask::Year, false) => ["When was it released?".into(), "Which year did it come out?".into(), "What is its release date?".into()],
        (Ask::Genre, true) => [format!("What genre is {t}?"), format!("What kind of movie is {t}?"), format!("Which category does {t} belong to?")],
        (Ask::Genre, false) => ["What genre is it?".into(), "What kind of movie is it?".into(), "Which category does it belong to?".into()],
        (Ask::Composer, true) => [format!("Who composed the music for {t}?"), format!("Who wrote the score of {t}?"), format!("Composer of {t}?")],
        (Ask::Composer, false) => ["Who composed the music?".into(), "Who wrote the score?".into(), "And the composer?".into()],
        (Ask::Cast, true) => [format!("Who played {character} in {t}?"), format!("Which actor portrayed {character} in {t}?"), format!("{character} in {t} was played by whom?")],
        (Ask::Cast, false) => [format!("Who played {character}?"), format!("Which actor portrayed {character}?"), format!("{character} was played by whom?")],
        (Ask::Next, true) => [format!("What comes after {t} in the series?"), format!("Which movie follows {t}?"), format!("The next one in the series after {t}?")],
        (Ask::Next, false) => ["What comes next in the series?".into(), "Which movie follows it?".into(), "And the next installment?".into()],
        (Ask::Ordinal, true) => [format!("Which number is {t} in its series?"), format!("What is the series position of {t}?"), format!("Where does {t} sit in the series order?")],
        (Ask::Ordinal, false) => ["Which number is it?".into(), "What is its position in the series?".into(), "Where does it sit in the order?".into()],
    }
}

/// The generated graph and conversations.
#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    pub facts: Vec<NaryFact>,
    pub dataset: Dataset,
}

impl SyntheticWorld {
    pub fn kg(&self) -> Result<KgIndex> {
        KgIndex::from_facts(self.facts.clone())
    }

    pub fn qualified_fact_count(&self) -> usize {
        self.facts.iter().filter(|f| !f.qualifiers.is_empty()).count()
    }
}

/// The movie world of the running example: Avengers: Endgame, its series
/// successor and the comic author it is based on.
pub fn endgame_facts() -> Vec<NaryFact> {
    let endgame = entity("m", "Avengers: Endgame");
    let far_from_home = entity("m", "Spider-Man: Far from Home");
    let mcu = entity("s", "Marvel Cinematic Universe");
    vec![
        NaryFact::triple("f_eg_series", endgame.clone(), part_of_series(), mcu.clone())
            .with_qualifier(followed_by(), far_from_home.clone())
            .with_qualifier(series_ordinal(), EntityRef::new("lit:22", "22")),
        NaryFact::triple("f_eg_after", endgame.clone(), after_work_by(), entity("p", "Stan Lee")),
    ]
}

fn build_movies(facts: &mut Vec<NaryFact>) -> Vec<Movie> {
    let mut movies = Vec::new();
    for i in 0..MOVIES {
        let title = format!("{} {}", ADJECTIVES[i / NOUNS.len()], NOUNS[i % NOUNS.len()]);
        let cast = (i < CAST_MOVIES).then(|| {
            let actor = format!("{} {}", ACTOR_FIRST[i % 10], ACTOR_LAST[i / 10]);
            let character = format!("{} {}", CHAR_FIRST[(i * 3) % 10], CHAR_LAST[i / 10]);
            (entity("p", &actor), entity("c", &character))
        });
        movies.push(Movie {
            entity: entity("m", &title),
            director: entity("p", DIRECTORS[(i * 5) % DIRECTORS.len()]),
            year: year(1990 + (i as u32 * 7) % 30),
            genre: entity("g", GENRES[(i * 3) % GENRES.len()]),
            composer: entity("p", COMPOSERS[(i * 3 + 1) % COMPOSERS.len()]),
            cast,
            next: None,
            ordinal: None,
        });
    }
    // Series are built from consecutive movies.
    for (s, name) in SERIES.iter().enumerate() {
        let series = entity("s", name);
        for k in 0..SERIES_LEN {
            let i = s * SERIES_LEN + k;
            let ordinal = EntityRef::new(format!("lit:{}", k + 1), (k + 1).to_string());
            let mut fact = NaryFact::triple(format!("f{i}_series"), movies[i].entity.clone(), part_of_series(), series.clone());
            if k + 1 < SERIES_LEN {
                let next = movies[i + 1].entity.clone();
                fact = fact.with_qualifier(followed_by(), next.clone());
                if k == 0 {
                    movies[i].next = Some(next);
                }
            }
            fact = fact.with_qualifier(series_ordinal(), ordinal.clone());
            if k == 0 {
                movies[i].ordinal = Some(ordinal);
            }
            facts.push(fact);
        }
    }
    for (i, m) in movies.iter().enumerate() {
        let e = &m.entity;
        facts.push(NaryFact::triple(format!("f{i}_dir"), e.clone(), director(), m.director.clone()));
        facts.push(NaryFact::triple(format!("f{i}_date"), e.clone(), publication_date(), m.year.clone()));
        facts.push(NaryFact::triple(format!("f{i}_genre"), e.clone(), genre(), m.genre.clone()));
        facts.push(NaryFact::triple(format!("f{i}_music"), e.clone(), composer(), m.composer.clone()));
        if let Some((actor, character)) = &m.cast {
            facts.push(
                NaryFact::triple(format!("f{i}_cast"), e.clone(), cast_member(), actor.clone())
                    .with_qualifier(character_role(), character.clone()),
            );
        }
    }
    movies
}

fn endgame_movies(facts: &mut Vec<NaryFact>) -> Movie {
    facts.extend(endgame_facts());
    let endgame = entity("m", "Avengers: Endgame");
    let ffh = entity("m", "Spider-Man: Far from Home");
    let actor = entity("p", "Robert Downey Jr");
    let character = entity("c", "Tony Stark");
    let m = Movie {
        entity: endgame.clone(),
        director: entity("p", "Anthony Russo"),
        year: year(2019),
        genre: entity("g", "superhero epic"),
        composer: entity("p", "Alan Silvestri"),
        cast: Some((actor.clone(), character.clone())),
        next: Some(ffh.clone()),
        ordinal: Some(EntityRef::new("lit:22", "22")),
    };
    facts.push(NaryFact::triple("f_eg_dir", endgame.clone(), director(), m.director.clone()));
    facts.push(NaryFact::triple("f_eg_date", endgame.clone(), publication_date(), m.year.clone()));
    facts.push(NaryFact::triple("f_eg_genre", endgame.clone(), genre(), m.genre.clone()));
    facts.push(NaryFact::triple("f_eg_music", endgame.clone(), composer(), m.composer.clone()));
    facts.push(
        NaryFact::triple("f_eg_cast", endgame, cast_member(), actor).with_qualifier(character_role(), character),
    );
    facts.push(NaryFact::triple("f_ffh_dir", ffh.clone(), director(), entity("p", "Jon Watts")));
    facts.push(NaryFact::triple("f_ffh_date", ffh.clone(), publication_date(), year(2019)));
    facts.push(
        NaryFact::triple("f_ffh_series", ffh, part_of_series(), entity("s", "Marvel Cinematic Universe"))
            .with_qualifier(series_ordinal(), EntityRef::new("lit:23", "23")),
    );
    m
}

fn conversation(id: usize, movie: &Movie, asks: &[Ask]) -> ConversationScript {
    let character = movie.cast.as_ref().map(|(_, c)| c.label.clone()).unwrap_or_default();
    let intents = asks
        .iter()
        .enumerate()
        .map(|(j, &ask)| {
            let titled = j == 0;
            let t = if titled { movie.entity.label.as_str() } else { "it" };
            let all = phrasings(ask, t, titled, &character);
            let n = 2 + (id + j) % 2;
            let gold = movie.gold(ask).expect("asked relation exists");
            IntentScript {
                id: format!("c{id:02}_i{j}"),
                questions: all[..n].to_vec(),
                gold_answers: vec![GoldAnswer {
                    id: Some(gold.id.clone()),
                    label: gold.label.clone(),
                }],
            }
        })
        .collect();
    ConversationScript {
        id: format!("c{id:02}"),
        domain: "movies".into(),
        intents,
    }
}

/// The synthetic world: graph plus 20 scripted conversations.
pub fn toy_world() -> SyntheticWorld {
    let mut facts = Vec::new();
    let movies = build_movies(&mut facts);
    let endgame = endgame_movies(&mut facts);

    let mut conversations = Vec::new();
    for (c, movie) in movies.iter().take(19).enumerate() {
        let mut pool = vec![Ask::Director, Ask::Year, Ask::Genre, Ask::Composer];
        if movie.cast.is_some() {
            pool.push(Ask::Cast);
        }
        let n = pool.len();
        pool.rotate_left(c % n);
        if movie.next.is_some() {
            pool.insert(1, Ask::Next);
            pool.insert(2, Ask::Ordinal);
        }
        pool.truncate(5);
        conversations.push(conversation(c, movie, &pool));
    }
    conversations.push(conversation(
        19,
        &endgame,
        &[Ask::Director, Ask::Next, Ask::Cast, Ask::Year, Ask::Composer],
    ));
    SyntheticWorld {
        facts,
        dataset: Dataset { conversations },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn world_shape() {
        let w = toy_world();
        assert!((190..=230).contains(&w.facts.len()), "{}", w.facts.len());
        assert!((35..=60).contains(&w.qualified_fact_count()), "{}", w.qualified_fact_count());
        assert_eq!(w.dataset.conversations.len(), 20);
        assert!(w.dataset.conversations.iter().all(|c| c.intents.len() == 5));
        w.dataset.validate().unwrap();
        let kg = w.kg().unwrap();
        for c in &w.dataset.conversations {
            for i in &c.intents {
                let g = i.gold_answers[0].id.as_deref().unwrap();
                assert!(kg.contains(g), "{g}");
            }
        }
    }
}
