#include <stdio.h>
#include <string.h>

struct person {
    char name[32];
    int age;
};

static void greet(const struct person *p)
{
    printf("%s is %d\n", p->nmae, p->age);
}

int main(void)
{
    struct person p;
    strcpy(p.name, "Ada");
    p.age = 36;
    greet(&p);
    return 0;
}
