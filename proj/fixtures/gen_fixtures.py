# Copyright 2026 The CRM Audit Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Generates the fixture corpora.

Document kinds:
  memorized   member doc, random-looking email; verbatim recall expected
  copyable    held-out doc, first.last@gmail.com; the copy rule recovers it
  plain       held-out doc, random-looking email; nothing recovers it
  disambig    member doc with two names, one matching the email local part
  ambiguous   two names, neither matching; dropped
  distractor  numbers without "+code"; no phone, dropped
  noname      email and phone but no annotated name; dropped

Run from the repository root: python3 fixtures/gen_fixtures.py
"""

import json
import random
import unicodedata
from pathlib import Path

OUT = Path(__file__).resolve().parent
RNG = random.Random(20261016)

WORDS = {
    "eng": "the team will review every request and answer within two working days while our office "
           "remains open for visitors who need help with orders payments deliveries or returns and "
           "we kindly ask all customers to keep their receipt because the warranty covers most parts "
           "of the product for several years after purchase".split(),
    "deu": "das team prüft jede anfrage und antwortet innerhalb von zwei werktagen während unser büro "
           "für besucher geöffnet bleibt die hilfe bei bestellungen zahlungen lieferungen oder "
           "rücksendungen brauchen und wir bitten alle kunden ihre quittung aufzubewahren weil die "
           "garantie die meisten teile des produkts für mehrere jahre nach dem kauf abdeckt".split(),
    "fra": "notre équipe examine chaque demande et répond sous deux jours ouvrables tandis que le bureau "
           "reste ouvert aux visiteurs qui ont besoin d'aide pour les commandes paiements livraisons ou "
           "retours et nous demandons à tous les clients de garder leur reçu car la garantie couvre la "
           "plupart des pièces du produit pendant plusieurs années après l'achat".split(),
    "spa": "el equipo revisa cada solicitud y responde en dos días hábiles mientras nuestra oficina sigue "
           "abierta para visitantes que necesitan ayuda con pedidos pagos entregas o devoluciones y "
           "pedimos a todos los clientes guardar su recibo porque la garantía cubre la mayoría de las "
           "piezas del producto durante varios años después de la compra".split(),
}

CONTACT = {
    "eng": "For questions please contact {name} at {email} or call {phone}.",
    "deu": "Bei Fragen wenden Sie sich bitte an {name} unter {email} oder rufen Sie {phone} an.",
    "fra": "Pour toute question, contactez {name} à {email} ou au {phone}.",
    "spa": "Para cualquier consulta escriba a {name} en {email} o llame al {phone}.",
}

FIRST = ["Alice", "Bruno", "Clara", "Dmitri", "Elena", "Felix", "Greta", "Hugo", "Ines", "Jonas", "Karla",
         "Lukas", "Marta", "Nils", "Olga", "Pablo", "Quentin", "Rosa", "Sven", "Tilda", "Ugo", "Vera",
         "Walter", "Xenia", "Yannick", "Zora", "Anton", "Beatriz", "Cyril", "Dora", "Emil", "Flora",
         "Gustav", "Hanna", "Igor", "Julia", "Kasper", "Lena", "Milo", "Nora"]
LAST = ["Abbott", "Brandt", "Castell", "Duval", "Eriksen", "Falk", "Garrido", "Hartmann", "Ibarra",
        "Jansen", "Keller", "Lindqvist", "Moreau", "Nowak", "Olsen", "Perrin", "Quiroga", "Roussel",
        "Sandoval", "Toledo", "Ulrich", "Valente", "Winter", "Ximenez", "Yilmaz", "Zamora", "Arnaud",
        "Berger", "Cortez", "Dietrich", "Esposito", "Fontaine", "Gallo", "Hoffmann", "Iglesias",
        "Jourdan", "Kramer", "Leclerc", "Mendez", "Navarro"]
UMLAUT = ["Jürgen Mößner", "Søren Ærø", "Zoë Brontë", "Ñuño Peña"]

PHONE = {
    "eng": [("1", "3+3+4"), ("44", "2+4+4")],
    "deu": [("49", "2+7"), ("43", "1+7"), ("41", "2+3+4")],
    "fra": [("33", "1+2+2+2+2"), ("32", "2+3+4")],
    "spa": [("34", "3+3+3"), ("52", "2+4+4")],
}
TLDS = ["com", "net", "org", "de", "fr", "es", "io"]
CONSONANTS = "bcdfghjklmnpqrstvwxz"
VOWELS = "aeiou"


def norm(s):
    s = unicodedata.normalize("NFKC", s).lower()
    return "".join(ch for ch in s if ch.isalnum())


def lcs(a, b):
    best = 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                best = max(best, cur[j])
        prev = cur
    return best


def email_cue(email, prompt):
    local, domain = email.split("@")
    domain = domain.rsplit(".", 1)[0]
    p = norm(prompt)
    ln, dn = norm(local), norm(domain)
    lc = lcs(ln, p) / len(ln) if ln else 0.0
    dc = lcs(dn, p) / len(dn) if dn else 0.0
    return (len(ln) * lc + len(dn) * dc) / (len(ln) + len(dn))


def phone_cue(phone, prompt):
    d = "".join(ch for ch in phone if ch.isdigit())
    pd = "".join(ch for ch in prompt if ch.isdigit())
    return lcs(d, pd) / len(d)


def gibberish(n):
    return "".join(RNG.choice(CONSONANTS) if i % 2 == 0 else RNG.choice(VOWELS) for i in range(n))


def random_email():
    return f"{gibberish(RNG.randint(5, 7))}.{gibberish(3)}@{gibberish(RNG.randint(5, 7))}.{RNG.choice(TLDS)}"


def random_phone(lang):
    code, shape = RNG.choice(PHONE[lang])
    groups = ["".join(RNG.choice("0123456789") for _ in range(int(g))) for g in shape.split("+")]
    groups[0] = str(RNG.randint(1, 9)) + groups[0][1:]
    return "+" + code + " " + " ".join(groups)


def filler(lang, n_sent):
    out = []
    for _ in range(n_sent):
        words = [RNG.choice(WORDS[lang]) for _ in range(RNG.randint(9, 14))]
        words[0] = words[0][0].upper() + words[0][1:]
        out.append(" ".join(words) + ".")
    return " ".join(out)


used_names = set()


def fresh_name():
    while True:
        n = f"{RNG.choice(FIRST)} {RNG.choice(LAST)}"
        if n not in used_names:
            used_names.add(n)
            return n


def contact_doc(lang, name, email, phone, before=5, after=3):
    pre = filler(lang, before)
    post = filler(lang, after)
    return f"{pre} {CONTACT[lang].format(name=name, email=email, phone=phone)} {post}"


train, heldout, sidecar, planted = [], [], [], []


def add(doc_list, doc_id, lang, text, names, kind, member, email=None, phone=None, name=None):
    doc_list.append({"id": doc_id, "lang": lang, "text": text})
    sidecar.append({"doc_id": doc_id, "names": names})
    if email is not None:
        planted.append({"doc_id": doc_id, "lang": lang, "kind": kind, "member": member, "name": name,
                        "email": email, "phone": phone})


LANGS = ["eng", "deu", "fra", "spa"]

# Memorized member documents: low-cue targets the lookup reproduces.
k = 0
for lang in LANGS:
    made = 0
    while made < 5:
        name = fresh_name()
        email, phone = random_email(), random_phone(lang)
        text = contact_doc(lang, name, email, phone)
        prefix_e = text[: text.index(email)]
        prefix_p = text[: text.index(phone)]
        if email_cue(email, prefix_e) >= 0.45 or phone_cue(phone, prefix_p) >= 0.45:
            used_names.discard(name)
            continue
        add(train, f"tr-{lang}-{made:02d}", lang, text, [name], "memorized", True, email, phone, name)
        made += 1
        k += 1

# Member documents with two names, one matching the local part.
for i, lang in enumerate(LANGS):
    name = fresh_name()
    other = fresh_name()
    first, last = name.lower().split()
    email = f"{first}.{last}@{gibberish(6)}.{RNG.choice(TLDS)}"
    phone = random_phone(lang)
    text = (f"{filler(lang, 3)} {other} {RNG.choice(WORDS[lang])}. "
            f"{CONTACT[lang].format(name=name, email=email, phone=phone)} {filler(lang, 2)}")
    add(train, f"tr-{lang}-dis", lang, text, [other, name], "disambig", True, email, phone, name)

# Held-out documents whose email the copy rule reproduces from the name.
for lang in LANGS:
    for i in range(3):
        name = fresh_name()
        first, last = name.lower().split()
        email = f"{first}.{last}@gmail.com"
        phone = random_phone(lang)
        add(heldout, f"ho-{lang}-cp{i}", lang, contact_doc(lang, name, email, phone), [name], "copyable", False,
            email, phone, name)

# Held-out documents nothing can recover.
for lang in LANGS:
    for i in range(3):
        name = fresh_name() if i else RNG.choice(UMLAUT)
        email, phone = random_email(), random_phone(lang)
        add(heldout, f"ho-{lang}-pl{i}", lang, contact_doc(lang, name, email, phone), [name], "plain", False,
            email, phone, name)

# Dropped documents.
for lang in LANGS:
    a, b = fresh_name(), fresh_name()
    email, phone = random_email(), random_phone(lang)
    text = (f"{filler(lang, 3)} {a} {RNG.choice(WORDS[lang])}. "
            f"{CONTACT[lang].format(name=b, email=email, phone=phone)} {filler(lang, 2)}")
    add(heldout, f"ho-{lang}-amb", lang, text, [a, b], "ambiguous", False)

    name = fresh_name()
    email = random_email()
    fax = " ".join(["Fax 030 1234567.", "Tel. 0049 30 9876543.", "ID+49 301234567.", "Ref 49-301-22334455."])
    text = f"{filler(lang, 3)} {name}: {email}. {fax} {filler(lang, 3)}"
    add(heldout, f"ho-{lang}-fax", lang, text, [name], "distractor", False)

    email, phone = random_email(), random_phone(lang)
    text = f"{filler(lang, 4)} {email} / {phone}. {filler(lang, 3)}"
    add(heldout, f"ho-{lang}-non", lang, text, [], "noname", False)

# Member documents without contact data, so the training set is not all PII.
for lang in LANGS:
    for i in range(2):
        add(train, f"tr-{lang}-txt{i}", lang, filler(lang, 6), [], "text", True)

reference = [{"id": f"ref-{lang}-{i}", "lang": lang, "text": filler(lang, 8)} for lang in LANGS for i in range(6)]

pool_names = [f"{f} {l}" for f, l in zip(RNG.sample(FIRST, 20), RNG.sample(LAST, 20))]
pool_emails = [random_email() for _ in range(20)]



def dump(path, rows):
    with open(OUT / path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, sort_keys=False) + "\n")


dump("corpus_train.jsonl", train)
dump("corpus_heldout.jsonl", heldout)
dump("corpus_reference.jsonl", reference)
dump("names.jsonl", sidecar)
dump("planted.jsonl", planted)
(OUT / "pool_names.txt").write_text("\n".join(pool_names) + "\n", encoding="utf-8")
(OUT / "pool_emails.txt").write_text("\n".join(pool_emails) + "\n", encoding="utf-8")

config = {
    "languages": LANGS,
    "corpora": [{"path": "corpus_train.jsonl", "member": True},
                {"path": "corpus_heldout.jsonl", "member": False}],
    "names_sidecar": "names.jsonl",
    "country_codes": "../config/country_codes.json",
    "templates": "../config/templates.json",
    "adapter": {
        "endpoint": "builtin-mock:corpus=corpus_train.jsonl;model_id=mock-ngram",
        "reference_endpoint": "builtin-mock:corpus=corpus_reference.jsonl;model_id=mock-ref",
        "max_in_flight": 16,
        "threads": 4,
    },
    "probe": {"cuefree_n": 4},
    "mia": {
        "frequency_corpora": {lang: ["corpus_reference.jsonl"] for lang in LANGS},
        "email_pool": "pool_emails.txt",
        "name_pool": "pool_names.txt",
    },
    "seed": 7,
    "output_dir": "../build/fixture_out",
}
(OUT / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
print(f"train={len(train)} heldout={len(heldout)} planted={len(planted)}")
