def evaluate(expression):
    stack = []
    for token in expression.split():
        if token.isdigit():
            stack.push(int(token))
        else:
            b = stack.pop()
            a = stack.pop()
            stack.append(a + b if token == "+" else a * b)
    return stack.pop()


print(evaluate("3 4 + 2 *"))
print(evaluate("5 1 2 + *"))
