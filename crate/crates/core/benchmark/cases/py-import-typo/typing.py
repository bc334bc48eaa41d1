from typing import OrderedDict


def first_seen(items):
    seen = OrderedDict()
    for item in items:
        seen.setdefault(item, 0)
        seen[item] += 1
    return list(seen.items())


for name, count in first_seen(["b", "a", "b", "c", "a", "b"]):
    print(name, count)
