"""Regenerate toy_strandings.csv, a small synthetic file in the layout of the public dataset."""

import csv
import datetime
import random

SITES = {
    15: [(-18.48, -70.33), (-19.05, -70.28)],
    1: [(-20.22, -70.15), (-21.0, -70.17)],
    2: [(-23.65, -70.40), (-25.40, -70.48)],
    4: [(-29.95, -71.34), (-31.6, -71.55)],
    8: [(-36.80, -73.10), (-37.9, -73.6)],
    10: [(-41.50, -72.95), (-42.6, -73.8)],
}
GROUPS = [("PI", "Otaria flavescens", 0.62), ("BI", "Spheniscus humboldti", 0.26),
          ("CE", "Phocoena spinipinnis", 0.07), ("MU", "Lontra felina", 0.03), ("QU", "Chelonia mydas", 0.02)]
HEADER = ["REGION", "RECORD (n)", "LAT", "LON", "Sample TIME", "SPECIES Type", "SPECIES",
          "INSTITUTIONS ENROLLED", "GENDER", "MARKS", "REHABILITATION CENTER", "AGE", "CITY",
          "VITAL CONDITION", "SIZE", "H5N1 SAMPLED", "LOCATION INFORs", "STARTING DAY",
          "ENDING DAY", "CORPORAL CONDITION"]


def main():
    rng = random.Random(2023)
    start = datetime.date(2023, 1, 2)
    with open("toy_strandings.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(HEADER)
        for _ in range(200):
            region = rng.choice(list(SITES))
            lat, lon = rng.choice(SITES[region])
            lat += rng.uniform(-0.05, 0.05)
            lon += rng.uniform(-0.05, 0.05)
            group, species, _ = rng.choices(GROUPS, weights=[g[2] for g in GROUPS])[0]
            day = start + datetime.timedelta(days=rng.randrange(26 * 7))
            count = 1 + int(rng.expovariate(0.25)) if group == "PI" else 1 + int(rng.expovariate(0.8))
            w.writerow([region, count, f"{lat:.4f}", f"{lon:.4f}", day.isoformat(), group, species,
                        "SERNAPESCA", rng.choice(["Macho", "Hembra", ""]), "", "",
                        rng.choice(["Adulto", "Juvenil", ""]), "", rng.choice(["Muerto", "Vivo"]),
                        "", "NO", "", "", "", ""])


if __name__ == "__main__":
    main()
