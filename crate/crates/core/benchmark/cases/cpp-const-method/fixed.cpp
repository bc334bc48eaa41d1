#include <iostream>
#include <string>
#include <utility>

class Counter {
public:
    explicit Counter(std::string name) : name_(std::move(name)) {}
    void add(int n) { total_ += n; }
    int total() const { return total_; }
    const std::string &name() const { return name_; }

private:
    std::string name_;
    int total_ = 0;
};

static void report(const Counter &c)
{
    std::cout << c.name() << ": " << c.total() << "\n";
}

int main()
{
    Counter c("hits");
    c.add(3);
    c.add(4);
    report(c);
    return 0;
}
