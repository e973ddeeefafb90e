"""Deterministic synthetic inputs in the canonical CSV layouts.

The focus-country plan mirrors the published survey availability (number of
de-duplicated surveys since 1990 and the latest survey year per country) and
the sub-region membership counts, so the generated files exercise every
ingestion rule: pre-1990 and non-married records that must be filtered out,
cross-type duplicates resolved by survey priority, and same-type duplicates
resolved by averaging.  Values are invented: smooth logistic model
trajectories plus noisy survey draws around them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import ESTIMATE_COLUMNS, GROUP_COLUMNS, SURVEY_COLUMNS

REGIONS = {
    "Eastern Africa": "Africa",
    "Middle Africa": "Africa",
    "Northern Africa": "Africa",
    "Southern Africa": "Africa",
    "Western Africa": "Africa",
    "Eastern Asia": "Asia",
    "South-Central Asia": "Asia",
    "South-Eastern Asia": "Asia",
    "Western Asia": "Asia",
    "Caribbean": "Latin America and the Caribbean",
    "Central America": "Latin America and the Caribbean",
    "South America": "Latin America and the Caribbean",
    "Eastern Europe": "Europe",
    "Melanesia": "Oceania",
    "Micronesia": "Oceania",
    "Polynesia": "Oceania",
}

# code | name | sub-region | surveys since 1990 | latest survey
FOCUS = """\
AFG|Afghanistan|South-Central Asia|8|2018
DZA|Algeria|Northern Africa|7|2018
AGO|Angola|Middle Africa|4|2015
BGD|Bangladesh|South-Central Asia|13|2019
BLZ|Belize|Central America|5|2015
BEN|Benin|Western Africa|6|2017
BTN|Bhutan|South-Central Asia|4|2010
BOL|Bolivia|South America|6|2016
BWA|Botswana|Southern Africa|2|2017
BFA|Burkina Faso|Western Africa|11|2020
BDI|Burundi|Eastern Africa|7|2016
CPV|Cabo Verde|Western Africa|3|2018
KHM|Cambodia|South-Eastern Asia|6|2014
CMR|Cameroon|Middle Africa|7|2018
CAF|Central African Republic|Middle Africa|5|2018
TCD|Chad|Middle Africa|6|2019
COM|Comoros|Eastern Africa|3|2012
COG|Congo|Middle Africa|3|2014
CIV|Côte d’Ivoire|Western Africa|8|2020
PRK|DPR Korea|Eastern Asia|8|2017
COD|DR Congo|Middle Africa|6|2017
DJI|Djibouti|Eastern Africa|3|2012
EGY|Egypt|Northern Africa|10|2014
SLV|El Salvador|Central America|5|2014
ERI|Eritrea|Eastern Africa|3|2010
ETH|Ethiopia|Eastern Africa|12|2020
GMB|Gambia|Western Africa|7|2019
GHA|Ghana|Western Africa|13|2017
GIN|Guinea|Western Africa|6|2018
GNB|Guinea-Bissau|Western Africa|5|2018
HTI|Haiti|Caribbean|5|2016
HND|Honduras|Central America|6|2019
IND|India|South-Central Asia|8|2019
IDN|Indonesia|South-Eastern Asia|25|2018
IRN|Iran|South-Central Asia|9|2010
JOR|Jordan|Western Asia|7|2017
KEN|Kenya|Eastern Africa|11|2020
KIR|Kiribati|Micronesia|2|2018
KGZ|Kyrgyzstan|South-Central Asia|5|2018
LAO|Lao PDR|South-Eastern Asia|5|2017
LBN|Lebanon|Western Asia|4|2009
LSO|Lesotho|Southern Africa|9|2018
LBR|Liberia|Western Africa|4|2019
MDG|Madagascar|Eastern Africa|9|2020
MWI|Malawi|Eastern Africa|9|2019
MLI|Mali|Western Africa|7|2018
MRT|Mauritania|Western Africa|6|2019
MNG|Mongolia|Eastern Asia|9|2018
MAR|Morocco|Northern Africa|6|2018
MOZ|Mozambique|Eastern Africa|6|2015
MMR|Myanmar|South-Eastern Asia|6|2015
NAM|Namibia|Southern Africa|4|2013
NPL|Nepal|South-Central Asia|10|2019
NIC|Nicaragua|Central America|5|2011
NER|Niger|Western Africa|10|2021
NGA|Nigeria|Western Africa|12|2018
PAK|Pakistan|South-Central Asia|11|2018
PNG|Papua New Guinea|Melanesia|3|2016
PHL|Philippines|South-Eastern Asia|17|2017
RWA|Rwanda|Eastern Africa|8|2019
WSM|Samoa|Polynesia|4|2019
STP|Sao Tome and Principe|Middle Africa|5|2019
SEN|Senegal|Western Africa|12|2019
SLE|Sierra Leone|Western Africa|8|2019
SLB|Solomon Islands|Melanesia|2|2015
SOM|Somalia|Eastern Africa|4|2018
SSD|South Sudan|Eastern Africa|4|2015
LKA|Sri Lanka|South-Central Asia|4|2016
PSE|State of Palestine|Western Asia|6|2019
SDN|Sudan|Northern Africa|5|2014
SWZ|Swaziland|Southern Africa|5|2014
SYR|Syrian Arab Republic|Western Asia|4|2009
TJK|Tajikistan|South-Central Asia|5|2017
TZA|Tanzania|Eastern Africa|8|2015
TLS|Timor-Leste|South-Eastern Asia|8|2016
TGO|Togo|Western Africa|6|2017
TUN|Tunisia|Northern Africa|6|2018
UGA|Uganda|Eastern Africa|12|2021
UKR|Ukraine|Eastern Europe|4|2012
UZB|Uzbekistan|South-Central Asia|4|2006
VUT|Vanuatu|Melanesia|3|2013
VNM|Vietnam|South-Eastern Asia|21|2020
YEM|Yemen|Western Asia|5|2013
ZMB|Zambia|Eastern Africa|6|2018
ZWE|Zimbabwe|Eastern Africa|7|2015
"""

# Non-focus countries, sized to the published per-sub-region "others" counts.
# Where the geographic sub-region has fewer members than that count, nearby
# countries fill the gap; this file is a fixture, not an authoritative map.
OTHERS = """\
MUS|Mauritius|Eastern Africa
REU|Réunion|Eastern Africa
KAZ|Kazakhstan|South-Central Asia
MDV|Maldives|South-Central Asia
TKM|Turkmenistan|South-Central Asia
GNQ|Equatorial Guinea|Middle Africa
GAB|Gabon|Middle Africa
MYS|Malaysia|South-Eastern Asia
SGP|Singapore|South-Eastern Asia
THA|Thailand|South-Eastern Asia
LBY|Libya|Northern Africa
ESH|Western Sahara|Northern Africa
MLT|Malta|Northern Africa
CYP|Cyprus|Northern Africa
ARE|United Arab Emirates|Northern Africa
GIB|Gibraltar|Northern Africa
ARM|Armenia|Western Asia
AZE|Azerbaijan|Western Asia
BHR|Bahrain|Western Asia
GEO|Georgia|Western Asia
IRQ|Iraq|Western Asia
ISR|Israel|Western Asia
KWT|Kuwait|Western Asia
OMN|Oman|Western Asia
QAT|Qatar|Western Asia
SAU|Saudi Arabia|Western Asia
TUR|Turkey|Western Asia
CRI|Costa Rica|Central America
GTM|Guatemala|Central America
MEX|Mexico|Central America
PAN|Panama|Central America
ZAF|South Africa|Southern Africa
FJI|Fiji|Melanesia
NCL|New Caledonia|Melanesia
NFK|Norfolk Island|Melanesia
CHN|China|Eastern Asia
HKG|China, Hong Kong SAR|Eastern Asia
JPN|Japan|Eastern Asia
KOR|Republic of Korea|Eastern Asia
MAC|China, Macao SAR|Eastern Asia
CUB|Cuba|Caribbean
DOM|Dominican Republic|Caribbean
JAM|Jamaica|Caribbean
TTO|Trinidad and Tobago|Caribbean
BRB|Barbados|Caribbean
BHS|Bahamas|Caribbean
LCA|Saint Lucia|Caribbean
VCT|Saint Vincent and the Grenadines|Caribbean
GRD|Grenada|Caribbean
PRI|Puerto Rico|Caribbean
ATG|Antigua and Barbuda|Caribbean
BLR|Belarus|Eastern Europe
BGR|Bulgaria|Eastern Europe
CZE|Czechia|Eastern Europe
HUN|Hungary|Eastern Europe
MDA|Republic of Moldova|Eastern Europe
POL|Poland|Eastern Europe
ROU|Romania|Eastern Europe
RUS|Russian Federation|Eastern Europe
SVK|Slovakia|Eastern Europe
FSM|Micronesia (Fed. States of)|Micronesia
MHL|Marshall Islands|Micronesia
NRU|Nauru|Micronesia
PLW|Palau|Micronesia
TON|Tonga|Polynesia
TUV|Tuvalu|Polynesia
PYF|French Polynesia|Polynesia
ARG|Argentina|South America
BRA|Brazil|South America
CHL|Chile|South America
COL|Colombia|South America
ECU|Ecuador|South America
GUY|Guyana|South America
PRY|Paraguay|South America
PER|Peru|South America
SUR|Suriname|South America
URY|Uruguay|South America
VEN|Venezuela|South America
"""

# Rough asymptotic modern use (%) per sub-region.
LEVELS = {
    "Central America": 68, "South America": 66, "Eastern Europe": 58, "Eastern Asia": 72,
    "South-Eastern Asia": 56, "Caribbean": 58, "Northern Africa": 58, "Southern Africa": 62,
    "South-Central Asia": 46, "Western Asia": 44, "Eastern Africa": 46, "Melanesia": 30,
    "Polynesia": 36, "Micronesia": 36, "Middle Africa": 22, "Western Africa": 24,
}

VANUATU_YEARS = (1995, 2007, 2013)
SURVEY_MIX = (("DHS", 0.5), ("MICS", 0.2), ("PMA", 0.1), ("NATIONAL", 0.15), ("OTHER", 0.05))
MODEL_YEARS = range(1970, 2031)


@dataclass(frozen=True)
class Country:
    code: str
    name: str
    sub_region: str
    is_focus: bool
    n_surveys: int = 0
    last_survey: int = 0

    @property
    def region(self) -> str:
        return REGIONS[self.sub_region]


def countries() -> list[Country]:
    out = []
    for line in FOCUS.splitlines():
        code, name, sub, n, last = line.split("|")
        out.append(Country(code, name, sub, True, int(n), int(last)))
    for line in OTHERS.splitlines():
        code, name, sub = line.split("|")
        out.append(Country(code, name, sub, False))
    return sorted(out, key=lambda c: c.code)


def _write(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _f(x: float) -> str:
    return f"{x:.2f}"


def _pick_years(rng, n, last, avoid=()):
    pool = [y for y in range(1990, last) if y not in avoid]
    chosen = rng.choice(pool, size=n - 1, replace=False) if n > 1 else []
    return sorted(int(y) for y in chosen) + [last]


def generate(out_dir, seed: int = 20240601) -> dict[str, Path]:
    """Write ``groups.csv``, ``survey.csv`` and ``estimates.csv`` into ``out_dir``."""
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    cs = countries()

    _write(
        out_dir / "groups.csv",
        GROUP_COLUMNS,
        [(c.code, c.name, c.sub_region, c.region, int(c.is_focus)) for c in cs],
    )

    params = {}
    for c in cs:
        top = float(np.clip(LEVELS[c.sub_region] + rng.normal(0, 8), 8, 82))
        params[c.code] = dict(
            lo=float(rng.uniform(1, 8)),
            top=top,
            mid=float(rng.normal(2000, 9)),
            scale=float(rng.uniform(7, 14)),
            trad=float(rng.uniform(2, 12)),
            sd=float(rng.uniform(0.4, 1.6)),
        )

    def model(code, t):
        p = params[code]
        return p["lo"] + (p["top"] - p["lo"]) / (1 + np.exp(-(t - p["mid"]) / p["scale"]))

    def trad(code, t):
        return params[code]["trad"] * (1.2 - 0.4 * (t - 1970) / 60)

    # survey plan
    melanesia_taken = set(VANUATU_YEARS)
    plan = {}
    for c in cs:
        if c.code == "VUT":
            plan[c.code] = list(VANUATU_YEARS)
        elif c.is_focus:
            avoid = melanesia_taken if c.sub_region == "Melanesia" else ()
            plan[c.code] = _pick_years(rng, c.n_surveys, c.last_survey, avoid)
        else:
            n = int(rng.integers(2, 10))
            last = int(rng.integers(2008, 2021))
            avoid = melanesia_taken if c.sub_region == "Melanesia" else ()
            plan[c.code] = _pick_years(rng, n, last, avoid)

    types, probs = zip(*SURVEY_MIX)
    rows = []
    last_model = {}
    for c in cs:
        bias = 2.5 if c.code == "SOM" else 0.0
        for year in plan[c.code]:
            m = float(model(c.code, year))
            shock = rng.normal(0, 4) if rng.random() < 0.05 else 0.0
            value = float(np.clip(m + bias + shock + rng.normal(0, params[c.code]["sd"]), 0.2, 90))
            tr = float(np.clip(trad(c.code, year) + rng.normal(0, 1), 0.0, 99 - value))
            stype = str(rng.choice(types, p=probs))
            rows.append([c.code, c.name, c.sub_region, c.region, year, stype, "MARRIED_IN_UNION",
                         _f(value), _f(tr), _f(rng.uniform(0.5, 2.5))])
        last_model[c.code] = plan[c.code][-1]
        # records the filters must drop
        if rng.random() < 0.4:
            year = int(rng.integers(1975, 1990))
            rows.append([c.code, c.name, c.sub_region, c.region, year, "DHS", "MARRIED_IN_UNION",
                         _f(float(model(c.code, year))), _f(trad(c.code, year)), ""])
        if rng.random() < 0.3:
            year = plan[c.code][-1]
            rows.append([c.code, c.name, c.sub_region, c.region, year, "DHS", "UNMARRIED",
                         _f(float(model(c.code, year)) * 0.5), _f(1.0), ""])

    focus_codes = [c.code for c in cs if c.is_focus]
    married = [r for r in rows if r[6] == "MARRIED_IN_UNION" and r[4] >= 1990]
    by_country = {}
    for r in married:
        by_country.setdefault(r[0], []).append(r)

    # same-type duplicates: 16 country-years over 12 countries
    dup_countries = sorted(rng.choice(focus_codes, size=12, replace=False).tolist())
    extra = []
    for k, code in enumerate(dup_countries):
        picks = 2 if k < 4 else 1
        for r in sorted(by_country[code], key=lambda r: r[4])[:picks]:
            d = list(r)
            d[7] = _f(min(90.0, float(r[7]) + float(rng.uniform(-3, 3))))
            extra.append(d)
    # cross-type duplicates at 41 country-years; an OTHER record gets a DHS
    # sibling (which then wins), anything else gets an OTHER sibling
    cross = sorted(rng.choice(sorted(by_country), size=41, replace=False).tolist())
    for code in cross:
        r = by_country[code][len(by_country[code]) // 2]
        d = list(r)
        d[5] = "DHS" if r[5] == "OTHER" else "OTHER"
        d[7] = _f(min(90.0, float(r[7]) + float(rng.uniform(-6, 6))))
        extra.append(d)
    rows.extend(extra)
    rows.sort(key=lambda r: (r[0], r[4], r[6], r[5], r[7]))
    _write(out_dir / "survey.csv", SURVEY_COLUMNS, rows)

    est = []
    for c in cs:
        for t in MODEL_YEARS:
            method = "INTERPOLATED" if t <= last_model[c.code] else "PROJECTED"
            m = float(model(c.code, t))
            width = 2.0 + 0.15 * abs(t - last_model[c.code])
            for variant, z in (("P95_LO", -1.96), ("P80_LO", -1.28), ("MEDIAN", 0.0),
                               ("P80_HI", 1.28), ("P95_HI", 1.96)):
                v = float(np.clip(m + z * width / 1.96, 0, 100))
                est.append([c.code, c.name, t, variant, "MODERN_PCT", "MARRIED_IN_UNION", method, _f(v)])
            est.append([c.code, c.name, t, "MEDIAN", "TRADITIONAL_PCT", "MARRIED_IN_UNION", method,
                        _f(float(trad(c.code, t)))])
    _write(out_dir / "estimates.csv", ESTIMATE_COLUMNS, est)
    return {n: out_dir / f"{n}.csv" for n in ("groups", "survey", "estimates")}
