//! Deterministic synthetic news corpus for tests, demos and benchmarks.
//!
//! Documents follow the inverted pyramid: the first sentence carries the
//! headline facts (who, what, where, when), later sentences add filler.
//! Titles are period-free and share most of their tokens with the opening
//! sentence; surnames and dates give natural out-of-vocabulary material for
//! small vocabularies.

use std::path::Path;

use crate::corpus::Document;
use crate::error::Result;
use crate::rng::Rng;

const SURNAMES: [&str; 24] = [
    "царёв",
    "немчинов",
    "ларионов",
    "щербаков",
    "виноградов",
    "ерофеев",
    "жаров",
    "зайцев",
    "калинин",
    "лебедев",
    "мельник",
    "носов",
    "орехов",
    "петухов",
    "рогозин",
    "соколов",
    "тарасов",
    "успенский",
    "фомин",
    "холодов",
    "цыганов",
    "шестаков",
    "юдин",
    "белкин",
];

const CITIES: [&str; 10] = [
    "москве",
    "казани",
    "твери",
    "омске",
    "туле",
    "перми",
    "сочи",
    "уфе",
    "самаре",
    "пензе",
];

/// (prepositional form for the sentence, nominative form for the title)
const TOPICS: [(&str, &str); 10] = [
    ("переговорах по тарифам", "переговоры по тарифам"),
    ("росте цен на топливо", "рост цен на топливо"),
    ("итогах сезона", "итоги сезона"),
    ("запуске новой линии", "запуск новой линии"),
    ("реформе образования", "реформа образования"),
    ("строительстве моста", "строительство моста"),
    ("выставке современного искусства", "выставка современного искусства"),
    ("премьере фильма", "премьера фильма"),
    ("снижении ставки", "снижение ставки"),
    ("модернизации сети", "модернизация сети"),
];

const VERBS: [&str; 4] = ["сообщил о", "объявил о", "рассказал о", "заявил о"];

const MONTHS: [&str; 12] = [
    "января",
    "февраля",
    "марта",
    "апреля",
    "мая",
    "июня",
    "июля",
    "августа",
    "сентября",
    "октября",
    "ноября",
    "декабря",
];

const FILLERS: [&str; 5] = [
    "подробности уточняются.",
    "официального комментария пока не поступало.",
    "собеседник агентства подтвердил эту информацию.",
    "решение вступит в силу после публикации.",
    "эксперты назвали новость ожидаемой.",
];

const LONG_TAIL: &str = "отметив что работа велась несколько месяцев подряд при участии \
региональных специалистов и что все необходимые документы уже направлены на согласование \
в профильные ведомства";

/// Generates `n` documents, deterministically for a given seed. Roughly one
/// document in seven gets a first sentence longer than 25 words whose tail
/// never appears in the title.
pub fn generate(n: usize, seed: u64) -> Vec<Document> {
    let mut rng = Rng::substream(seed, "fixture");
    (0..n)
        .map(|_| {
            let surname = SURNAMES[rng.below(SURNAMES.len())];
            let city = CITIES[rng.below(CITIES.len())];
            let (topic_prep, topic_nom) = TOPICS[rng.below(TOPICS.len())];
            let verb = VERBS[rng.below(VERBS.len())];
            let day = 1 + rng.below(28);
            let month = MONTHS[rng.below(MONTHS.len())];

            let mut first = format!("{surname} {verb} {topic_prep} в {city} {day} {month}");
            if rng.below(7) == 0 {
                first.push_str(&format!(" {LONG_TAIL}"));
            }
            first.push('.');

            let mut text = first;
            for _ in 0..1 + rng.below(2) {
                text.push(' ');
                text.push_str(FILLERS[rng.below(FILLERS.len())]);
            }
            let title = format!("{surname}: {topic_nom} в {city}");
            Document { text, title }
        })
        .collect()
}

/// Writes documents as UTF-8 JSONL with "text" and "title" fields.
pub fn write_jsonl(docs: &[Document], path: &Path) -> Result<()> {
    crate::corpus::write_jsonl(docs, path)
}
