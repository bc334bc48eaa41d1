#include <stdio.h>

int main(void)
{
    int unused;
    char *name = 42;
    printf("%s\n", name)
    return 0;
}
