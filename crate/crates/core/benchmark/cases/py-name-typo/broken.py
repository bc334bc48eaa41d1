def average(values):
    total = 0
    for v in values:
        total += v
    length = len(values)
    return total / lenght


samples = [2, 4, 9]
print(average(samples))
print(average([10]))
