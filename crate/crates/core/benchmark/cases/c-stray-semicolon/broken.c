#include <stdio.h>

static const char *sign_name(int x)
{
    const char *name;
    if (x > 0) {
        name = "positive";
    } else if (x < 0); {
        name = "negative";
    } else {
        name = "zero";
    }
    return name;
}

int main(void)
{
    printf("%s\n", sign_name(5));
    printf("%s\n", sign_name(-3));
    printf("%s\n", sign_name(0));
    return 0;
}
