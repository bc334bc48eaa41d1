from collections import Counter


def label(name, count):
    return name + ": " + str(count) + " items"


inventory = Counter(["apple", "pear", "apple", "fig", "apple"])
for fruit in sorted(inventory):
    print(label(fruit, inventory[fruit]))
