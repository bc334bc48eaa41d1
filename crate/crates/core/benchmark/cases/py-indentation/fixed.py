def count_vowels(word):
    total = 0
    for ch in word.lower():
        if ch in "aeiou":
            total += 1
    return total


for w in ["Banana", "sky", "Queue"]:
    print(w, count_vowels(w))
