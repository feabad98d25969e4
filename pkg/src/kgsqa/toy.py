"""Seeded generator for the bundled toy benchmark.

Four domains with three relations each, ~200 entities, ~400 templated gold
questions, an entity-linked corpus of ~100 documents and an entity type
table. Question templates and corpus sentence templates of a relation share
relation-indicative words, so that distant supervision has something to find.
Corpus coverage is partial and noisy on purpose: some facts have no
sentence, and some only have a sentence that links both entities without
expressing the relation.
"""

import json
import os

import numpy as np

ADJECTIVES = ["silent", "golden", "hidden", "broken", "distant", "crimson", "frozen", "endless",
              "quiet", "wild", "lost", "bright", "dark", "iron", "northern", "fallen"]
NOUNS = ["river", "garden", "mountain", "city", "storm", "harbor", "forest", "tower", "shadow",
         "valley", "island", "bridge", "empire", "winter", "road", "star"]
PLACE_PREFIX = ["new", "port", "lake", "fort", "mount", "east", "west", "north"]
GREEK = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "theta"]
LATIN = ["draconis", "lyrae", "cygni", "orionis", "tauri", "aquilae", "persei", "leonis"]
FIRST = ["anna", "marco", "elena", "victor", "sofia", "david", "laura", "peter", "nina", "omar",
         "clara", "hugo", "ines", "jonas", "rosa", "felix", "maya", "tomas"]
LAST = ["berg", "costa", "novak", "reed", "silva", "moreau", "lind", "okafor", "tanaka", "weiss",
        "hale", "varga", "nakamura", "ferreira", "dubois", "kowal"]

GENRES = ["drama", "comedy", "thriller", "western", "horror", "musical", "romance", "fantasy",
          "documentary", "animation"]
COUNTRIES = ["france", "italy", "japan", "brazil", "canada", "norway", "spain", "egypt", "chile",
             "india", "kenya", "poland"]
TOPICS = ["history", "war", "love", "science", "religion", "travel", "music", "politics",
          "nature", "medicine"]
PUBLISHERS = ["harbor press", "lantern books", "meridian house", "oak press", "atlas books",
              "quill house", "summit press", "beacon books", "willow house", "cedar press"]
TIME_ZONES = ["central time zone", "eastern time zone", "pacific time zone", "mountain time zone",
              "atlantic time zone", "alaska time zone"]
CONSTELLATIONS = ["draco", "lyra", "cygnus", "orion", "taurus", "aquila", "perseus", "leo",
                  "gemini", "hydra", "virgo", "pegasus"]
CATEGORIES = ["variable star", "binary star", "red giant", "white dwarf", "neutron star",
              "blue giant", "brown dwarf", "yellow dwarf"]

RELATIONS = {
    "film": ["film.film.directed_by", "film.film.genre", "film.film.country"],
    "book": ["book.written_work.author", "book.written_work.subjects",
             "book.written_work.publisher"],
    "location": ["location.location.containedby", "location.location.time_zones",
                 "location.location.people_born_here"],
    "astronomy": ["astronomy.star.constellation", "astronomy.celestial_object.discoverer",
                  "astronomy.celestial_object.category"],
}

QUESTIONS = {
    "film.film.directed_by": ["who directed {s} ?", "who was the director of {s} ?",
                              "which person made the film {s} ?"],
    "film.film.genre": ["what genre is {s} ?", "what kind of film is {s} ?",
                        "which genre does {s} belong to ?"],
    "film.film.country": ["which country produced {s} ?", "where was the film {s} produced ?",
                          "what country is {s} from ?"],
    "book.written_work.author": ["who wrote {s} ?", "who is the author of {s} ?",
                                 "which writer penned {s} ?"],
    "book.written_work.subjects": ["what is {s} about ?", "what subject does {s} cover ?",
                                   "what topic is the book {s} about ?"],
    "book.written_work.publisher": ["who published {s} ?", "which publisher released {s} ?",
                                    "what company printed {s} ?"],
    "location.location.containedby": ["which country contains {s} ?", "where is {s} located ?",
                                      "in what region is {s} located ?"],
    "location.location.time_zones": ["what time zone is {s} in ?",
                                     "which timezone does {s} use ?",
                                     "what is the local time zone of {s} ?"],
    "location.location.people_born_here": ["who was born in {s} ?",
                                           "which person is a native of {s} ?",
                                           "name someone born in {s} ?"],
    "astronomy.star.constellation": ["which constellation contains {s} ?",
                                     "in what constellation is {s} ?",
                                     "where in the sky is {s} ?"],
    "astronomy.celestial_object.discoverer": ["who discovered {s} ?",
                                              "who was the discoverer of {s} ?",
                                              "which astronomer found {s} ?"],
    "astronomy.celestial_object.category": ["what kind of object is {s} ?",
                                            "what type of star is {s} ?",
                                            "how is {s} classified ?"],
}

# declarative, encyclopedic phrasing: each template shares at most one relation
# word with the question templates, never a whole phrase
SENTENCES = {
    "film.film.directed_by": ["{s} is a film directed by {o} .",
                              "{o} served as director on {s} .",
                              "shot over two summers , {s} was helmed by {o} ."],
    "film.film.genre": ["{s} is a {o} film .", "the film {s} is often listed in the {o} genre .",
                        "{s} , a {o} picture , received mixed reviews ."],
    "film.film.country": ["{s} is a film produced in {o} .",
                          "{s} was shot by a studio based in {o} .",
                          "the production of {s} took place in {o} ."],
    "book.written_work.author": ["{s} is a novel written by {o} .",
                                 "{o} completed {s} late in life .",
                                 "the novel {s} by the writer {o} became popular ."],
    "book.written_work.subjects": ["{s} is a book on {o} .",
                                   "{s} explores the subject of {o} in detail .",
                                   "the main topic of the book {s} is {o} ."],
    "book.written_work.publisher": ["{s} was first published by {o} .",
                                    "{o} issued {s} in hardcover .",
                                    "the publisher {o} distributed {s} ."],
    "location.location.containedby": ["{s} is a town located in {o} .",
                                      "{s} lies within the borders of {o} .",
                                      "the region of {o} includes the town {s} ."],
    "location.location.time_zones": ["{s} observes the {o} .",
                                     "local clocks in {s} are set to the {o} .",
                                     "{s} falls within the {o} ."],
    "location.location.people_born_here": ["{o} was born in {s} and grew up nearby .",
                                           "{o} , a native of {s} , moved abroad .",
                                           "{s} is the birthplace of {o} ."],
    "astronomy.star.constellation": ["{s} is a star in the constellation {o} .",
                                     "{s} can be seen within the boundaries of {o} .",
                                     "observers find {s} in the {o} region ."],
    "astronomy.celestial_object.discoverer": ["{s} was discovered by {o} .",
                                              "the astronomer {o} first recorded {s} .",
                                              "{o} is credited with the discovery of {s} ."],
    "astronomy.celestial_object.category": ["{s} is classified as a {o} .",
                                            "{s} belongs to the class of {o} objects .",
                                            "astronomers consider {s} a {o} ."],
}

NOISE_LINKED = ["{s} and {o} appear in the same old article .",
                "{o} is often mentioned together with {s} .",
                "a newspaper once wrote about {s} and {o} ."]
# encyclopedic sentences rarely come without extra clauses
FILLERS = ["according to several sources", "as one local newspaper reported",
           "in the early years", "which many readers found surprising",
           "after a long period of work", "as noted in older records",
           "to the surprise of many", "during a busy season"]
P_FILLER = 0.75

NOISE_FREE = ["{s} is well known .", "many people have heard of {s} .",
              "{s} has a long and interesting history ."]

TYPES = {
    "film": "film", "book": "book", "location": "town", "astronomy": "star",
    "person": "person", "genre": "genre", "country": "country", "topic": "subject",
    "publisher": "publisher", "time_zone": "time zone", "constellation": "constellation",
    "category": "category",
}

SUBJECTS_PER_DOMAIN = 25
P_EXPRESS = 0.6
P_NOISE = 0.3


class _Ids:
    def __init__(self):
        self.names = {}
        self.types = {}

    def add(self, name, type_key):
        eid = f"m.{len(self.names):04d}"
        self.names[eid] = name
        self.types[eid] = TYPES[type_key]
        return eid


def _unique_names(rng, make, n, taken):
    out = []
    while len(out) < n:
        name = make(rng)
        if name not in taken:
            taken.add(name)
            out.append(name)
    return out


def generate(seed=0, subjects_per_domain=SUBJECTS_PER_DOMAIN):
    """Build the toy benchmark in memory; returns a dict of row lists."""
    rng = np.random.default_rng(seed)
    ids = _Ids()
    pick = lambda pool: pool[int(rng.integers(len(pool)))]  # noqa: E731

    people = [ids.add(n, "person") for n in _unique_names(
        rng, lambda r: f"{pick(FIRST)} {pick(LAST)}", 64, set())]
    pools = {
        "genre": [ids.add(n, "genre") for n in GENRES],
        "country": [ids.add(n, "country") for n in COUNTRIES],
        "topic": [ids.add(n, "topic") for n in TOPICS],
        "publisher": [ids.add(n, "publisher") for n in PUBLISHERS],
        "time_zone": [ids.add(n, "time_zone") for n in TIME_ZONES],
        "constellation": [ids.add(n, "constellation") for n in CONSTELLATIONS],
        "category": [ids.add(n, "category") for n in CATEGORIES],
    }
    object_pool = {
        "film.film.directed_by": people[:20],
        "film.film.genre": pools["genre"],
        "film.film.country": pools["country"],
        "book.written_work.author": people[16:36],
        "book.written_work.subjects": pools["topic"],
        "book.written_work.publisher": pools["publisher"],
        "location.location.containedby": pools["country"],
        "location.location.time_zones": pools["time_zone"],
        "location.location.people_born_here": people[28:64],
        "astronomy.star.constellation": pools["constellation"],
        "astronomy.celestial_object.discoverer": people[44:64],
        "astronomy.celestial_object.category": pools["category"],
    }

    title = lambda r: f"the {pick(ADJECTIVES)} {pick(NOUNS)}"  # noqa: E731
    makers = {
        "film": title,
        "book": title,
        "location": lambda r: f"{pick(PLACE_PREFIX)} {pick(NOUNS)}",
        "astronomy": lambda r: f"{pick(GREEK)} {pick(LATIN)}",
    }
    subjects = {}
    taken = set()
    for domain in RELATIONS:
        names = _unique_names(rng, makers[domain], subjects_per_domain - (domain in ("film", "book")),
                              taken)
        subjects[domain] = [ids.add(n, domain) for n in names]
    # one name shared across domains, resolved by relation constraints and popularity
    subjects["film"].append(ids.add("the godfather", "film"))
    subjects["book"].append(ids.add("the godfather", "book"))

    facts = []
    for domain, rels in RELATIONS.items():
        for s in subjects[domain]:
            for rel in rels:
                facts.append((s, rel, pick(object_pool[rel])))
    # the film adaptation's credits
    coppola = ids.add("francis ford coppola", "person")
    puzo = ids.add("mario puzo", "person")
    facts = [(s, r, coppola if (ids.names[s], r) == ("the godfather", "film.film.directed_by") else
              puzo if (ids.names[s], r) == ("the godfather", "book.written_work.author") else o)
             for s, r, o in facts]

    questions = []
    for s, rel, o in facts:
        n_q = 1 + int(rng.random() < 0.4)
        for t in rng.choice(3, size=n_q, replace=False):
            questions.append((QUESTIONS[rel][int(t)].format(s=ids.names[s]), s, rel, o))

    docs = {}

    def add_sentence(entity, template, s, o, filler=False):
        text = template.format(s=ids.names[s], o=ids.names[o])
        if filler and rng.random() < P_FILLER:
            body = text[:-2]
            text = (f"{pick(FILLERS)} , {body} ." if rng.random() < 0.5
                    else f"{body} , {pick(FILLERS)} .")
        links = sorted({s, o} if "{o}" in template else {s})
        docs.setdefault(entity, []).append({"tokens": text.split(), "links": links})

    for s, rel, o in facts:
        u = rng.random()
        home = s if rng.random() < 0.8 else o
        if u < P_EXPRESS:
            add_sentence(home, pick(SENTENCES[rel]), s, o, filler=True)
        elif u < P_EXPRESS + P_NOISE:
            add_sentence(home, pick(NOISE_LINKED), s, o, filler=True)
    for domain in RELATIONS:
        for s in subjects[domain]:
            add_sentence(s, pick(NOISE_FREE), s, s)

    return {
        "names": sorted(ids.names.items()),
        "labels": [(r, r) for rels in RELATIONS.values() for r in rels],
        "facts": facts,
        "types": sorted(ids.types.items()),
        "questions": questions,
        "corpus": [{"entity": e, "sentences": docs[e]} for e in sorted(docs)],
    }


def _write_tsv(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write("\t".join(row) + "\n")


DEFAULT_CONFIG = """\
# toy benchmark experiment
kg.facts = facts.tsv
kg.names = names.tsv
kg.labels = labels.tsv
corpus = corpus.jsonl
types = types.tsv
dataset = questions.tsv
target_domain = film
mode = qg
seed = 0
"""


def write_toy(out_dir, seed=0):
    """Write the toy benchmark files and a default experiment config; returns their paths."""
    data = generate(seed)
    os.makedirs(out_dir, exist_ok=True)
    paths = {k: os.path.join(out_dir, f) for k, f in (
        ("facts", "facts.tsv"), ("names", "names.tsv"), ("labels", "labels.tsv"),
        ("types", "types.tsv"), ("questions", "questions.tsv"), ("corpus", "corpus.jsonl"),
        ("config", "experiment.cfg"))}
    _write_tsv(paths["facts"], data["facts"])
    _write_tsv(paths["names"], data["names"])
    _write_tsv(paths["labels"], data["labels"])
    _write_tsv(paths["types"], data["types"])
    _write_tsv(paths["questions"], data["questions"])
    with open(paths["corpus"], "w", encoding="utf-8") as fh:
        for doc in data["corpus"]:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")
    with open(paths["config"], "w", encoding="utf-8") as fh:
        fh.write(DEFAULT_CONFIG)
    return paths
